#include "seqembed/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "seqembed/error.hpp"

namespace seqembed {
namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorKind::kConfig, "config key '" + key + "': '" + value + "' is not " + want);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) bad_value(key, value, "a comma-separated list");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
std::string format_list(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void validate_stage(const StageConfig& s, const char* name) {
  const std::string prefix = std::string(name) + ".";
  if (s.train_path.empty()) throw Error(ErrorKind::kConfig, prefix + "train path is required");
  if (s.dev_path.empty()) throw Error(ErrorKind::kConfig, prefix + "dev path is required");
  if (s.batch_size == 0) throw Error(ErrorKind::kConfig, prefix + "batch_size must be positive");
  if (s.epochs == 0) throw Error(ErrorKind::kConfig, prefix + "epochs must be at least 1");
  if (!(s.peak_lr > 0.0)) throw Error(ErrorKind::kConfig, prefix + "peak_lr must be positive");
  if (!(s.warmup_ratio >= 0.0 && s.warmup_ratio <= 1.0)) {
    throw Error(ErrorKind::kConfig, prefix + "warmup_ratio must lie in [0, 1]");
  }
  if (!(s.scale > 0.0)) throw Error(ErrorKind::kConfig, prefix + "scale must be positive");
}

}  // namespace

void RunConfig::validate() const {
  if (encoder.dim == 0) throw Error(ErrorKind::kConfig, "encoder.dim must be positive");
  if (encoder.max_seq_length == 0) {
    throw Error(ErrorKind::kConfig, "encoder.max_seq_length must be positive");
  }
  validate_stage(stage1, "stage1");
  validate_stage(stage2, "stage2");
  matryoshka.validate(encoder.dim);
  if (output_dir.empty()) throw Error(ErrorKind::kConfig, "output_dir is required");
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  bool weights_given = false;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size_setter = [](std::size_t& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) {
      field = parse_number<std::size_t>(k, v);
    };
  };
  auto double_setter = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_number<double>(k, v); };
  };
  auto bool_setter = [](bool& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_bool(k, v); };
  };
  auto path_setter = [&base_dir](std::filesystem::path& field) -> Setter {
    return [&field, &base_dir](const std::string&, const std::string& v) { field = resolve(base_dir, v); };
  };
  const std::map<std::string, Setter> setters = {
      {"seed", [&](const std::string& k, const std::string& v) { cfg.seed = parse_number<std::uint64_t>(k, v); }},
      {"output_dir", path_setter(cfg.output_dir)},
      {"encoder.dim", size_setter(cfg.encoder.dim)},
      {"encoder.max_seq_length", size_setter(cfg.encoder.max_seq_length)},
      {"matryoshka.dims",
       [&](const std::string& k, const std::string& v) { cfg.matryoshka.dims = parse_list<std::size_t>(k, v); }},
      {"matryoshka.weights",
       [&](const std::string& k, const std::string& v) {
         cfg.matryoshka.weights = parse_list<double>(k, v);
         weights_given = true;
       }},
      {"stage1.nli_train_path", path_setter(cfg.stage1.train_path)},
      {"stage1.nli_dev_path", path_setter(cfg.stage1.dev_path)},
      {"stage1.batch_size", size_setter(cfg.stage1.batch_size)},
      {"stage1.epochs", size_setter(cfg.stage1.epochs)},
      {"stage1.peak_lr", double_setter(cfg.stage1.peak_lr)},
      {"stage1.warmup_ratio", double_setter(cfg.stage1.warmup_ratio)},
      {"stage1.scale", double_setter(cfg.stage1.scale)},
      {"stage1.use_negatives", bool_setter(cfg.stage1.use_negatives)},
      {"stage2.sts_train_path", path_setter(cfg.stage2.train_path)},
      {"stage2.sts_dev_path", path_setter(cfg.stage2.dev_path)},
      {"stage2.batch_size", size_setter(cfg.stage2.batch_size)},
      {"stage2.epochs", size_setter(cfg.stage2.epochs)},
      {"stage2.peak_lr", double_setter(cfg.stage2.peak_lr)},
      {"stage2.warmup_ratio", double_setter(cfg.stage2.warmup_ratio)},
      {"stage2.scale", double_setter(cfg.stage2.scale)},
      {"eval.select_best_epoch", bool_setter(cfg.select_best_epoch)},
      {"data.allow_nli_pairs", bool_setter(cfg.allow_nli_pairs)},
  };

  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig, "config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw Error(ErrorKind::kConfig, "config line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
    it->second(key, value);
  }
  if (!weights_given) cfg.matryoshka.weights.assign(cfg.matryoshka.dims.size(), 1.0);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

void write_config(std::ostream& out, const RunConfig& c) {
  auto path = [](const std::filesystem::path& p) { return p.empty() ? std::string() : p.string(); };
  auto flag = [](bool b) { return b ? "true" : "false"; };
  out << "seed = " << c.seed << '\n'
      << "output_dir = " << path(c.output_dir) << '\n'
      << "encoder.dim = " << c.encoder.dim << '\n'
      << "encoder.max_seq_length = " << c.encoder.max_seq_length << '\n'
      << "matryoshka.dims = " << format_list(c.matryoshka.dims) << '\n'
      << "matryoshka.weights = " << format_list(c.matryoshka.weights) << '\n'
      << "stage1.nli_train_path = " << path(c.stage1.train_path) << '\n'
      << "stage1.nli_dev_path = " << path(c.stage1.dev_path) << '\n'
      << "stage1.batch_size = " << c.stage1.batch_size << '\n'
      << "stage1.epochs = " << c.stage1.epochs << '\n'
      << "stage1.peak_lr = " << format_double(c.stage1.peak_lr) << '\n'
      << "stage1.warmup_ratio = " << format_double(c.stage1.warmup_ratio) << '\n'
      << "stage1.scale = " << format_double(c.stage1.scale) << '\n'
      << "stage1.use_negatives = " << flag(c.stage1.use_negatives) << '\n'
      << "stage2.sts_train_path = " << path(c.stage2.train_path) << '\n'
      << "stage2.sts_dev_path = " << path(c.stage2.dev_path) << '\n'
      << "stage2.batch_size = " << c.stage2.batch_size << '\n'
      << "stage2.epochs = " << c.stage2.epochs << '\n'
      << "stage2.peak_lr = " << format_double(c.stage2.peak_lr) << '\n'
      << "stage2.warmup_ratio = " << format_double(c.stage2.warmup_ratio) << '\n'
      << "stage2.scale = " << format_double(c.stage2.scale) << '\n'
      << "eval.select_best_epoch = " << flag(c.select_best_epoch) << '\n'
      << "data.allow_nli_pairs = " << flag(c.allow_nli_pairs) << '\n';
}

}  // namespace seqembed
