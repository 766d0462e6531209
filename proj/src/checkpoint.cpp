#include "sslmatch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sslmatch/common.hpp"

namespace fs = std::filesystem;

namespace sslmatch {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'S', 'S', 'L', 'M', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void pod(T value) {
    os_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    pod<std::uint64_t>(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <typename T>
  T pod() {
    T value{};
    is_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 30)) throw Error("checkpoint: corrupt string length");
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  std::vector<double> doubles() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 34)) throw Error("checkpoint: corrupt array length");
    std::vector<double> v(n);
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }

 private:
  void check() {
    if (!is_) throw Error("checkpoint: truncated file");
  }
  std::istream& is_;
};

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    Writer w(os);
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.str(ck.architecture_id);
    w.pod<std::uint64_t>(ck.architecture_args.size());
    for (const auto& [key, value] : ck.architecture_args) {
      w.str(key);
      w.pod<std::int64_t>(value);
    }
    w.pod<std::int32_t>(ck.num_classes);

    w.pod<std::uint64_t>(ck.params.segments().size());
    for (const auto& seg : ck.params.segments()) {
      w.str(seg.name);
      w.pod<std::uint64_t>(seg.offset);
      w.pod<std::uint64_t>(seg.length);
      w.pod<std::uint8_t>(seg.trainable ? 1 : 0);
    }
    w.doubles({ck.params.values().begin(), ck.params.values().end()});

    w.pod<std::uint8_t>(ck.optimizer.kind == OptimizerKind::adam ? 0 : 1);
    w.pod<std::uint64_t>(ck.optimizer.step);
    w.doubles(ck.optimizer.first_moment);
    w.doubles(ck.optimizer.second_moment);

    w.pod<std::uint8_t>(ck.ema_params ? 1 : 0);
    w.pod<double>(ck.ema_decay);
    if (ck.ema_params) w.doubles(*ck.ema_params);

    w.pod<std::int64_t>(ck.epoch);
    w.str(ck.resolved_config);
    os.flush();
    if (!os) throw Error("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(path.string() + " is not a checkpoint file");
  }
  Reader r(is);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ck;
  ck.architecture_id = r.str();
  const auto n_args = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_args; ++i) {
    auto key = r.str();
    ck.architecture_args[key] = r.pod<std::int64_t>();
  }
  ck.num_classes = r.pod<std::int32_t>();

  const auto n_segments = r.pod<std::uint64_t>();
  if (n_segments > 4096) throw Error("checkpoint: corrupt segment count");
  std::vector<ParamSegment> segments(n_segments);
  for (auto& seg : segments) {
    seg.name = r.str();
    seg.offset = r.pod<std::uint64_t>();
    seg.length = r.pod<std::uint64_t>();
    seg.trainable = r.pod<std::uint8_t>() != 0;
  }
  ck.params = ParamVector::from_parts(std::move(segments), r.doubles());

  ck.optimizer.kind = r.pod<std::uint8_t>() == 0 ? OptimizerKind::adam : OptimizerKind::sgd_momentum;
  ck.optimizer.step = r.pod<std::uint64_t>();
  ck.optimizer.first_moment = r.doubles();
  ck.optimizer.second_moment = r.doubles();

  if (r.pod<std::uint8_t>() != 0) {
    ck.ema_decay = r.pod<double>();
    ck.ema_params = r.doubles();
    if (ck.ema_params->size() != ck.params.size()) throw Error("checkpoint: EMA size mismatch");
  } else {
    ck.ema_decay = r.pod<double>();
  }
  ck.epoch = r.pod<std::int64_t>();
  ck.resolved_config = r.str();
  return ck;
}

std::unique_ptr<Backbone> restore_backbone(const Checkpoint& ck, bool use_ema) {
  auto model = make_backbone(ck.architecture_id, ck.architecture_args);
  if (!model->params().same_layout(ck.params)) {
    throw Error("checkpoint parameters do not match architecture '" + ck.architecture_id + "'");
  }
  model->params() = ck.params;
  if (use_ema && ck.ema_params) model->params().assign_values(*ck.ema_params);
  return model;
}

}  // namespace sslmatch
