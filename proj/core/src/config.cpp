#include "lqe/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "lqe/error.hpp"

namespace lqe {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw InvalidInput("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v);
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_ranges(const std::vector<std::pair<int, int>>& ranges) {
  std::string s;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(ranges[i].first) + '-' + std::to_string(ranges[i].second);
  }
  return s;
}

std::vector<std::pair<int, int>> parse_ranges(std::string_view key, std::string_view text) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto dash = item.find('-');
    if (dash == std::string::npos) bad_value(key, text);
    out.emplace_back(parse_number<int>(key, std::string_view(item).substr(0, dash)),
                     parse_number<int>(key, std::string_view(item).substr(dash + 1)));
  }
  if (out.empty()) bad_value(key, text);
  return out;
}

struct Field {
  std::function<std::string()> get;
  std::function<void(std::string_view)> set;
};

using FieldTable = std::vector<std::pair<std::string, Field>>;

FieldTable fields(TrainConfig& c) {
  FieldTable t;
  auto num = [&t](std::string name, auto& ref) {
    using T = std::remove_reference_t<decltype(ref)>;
    auto* p = &ref;
    t.emplace_back(name, Field{[p] {
                                 if constexpr (std::is_floating_point_v<T>) return format_double(*p);
                                 else return std::to_string(*p);
                               },
                               [p, name](std::string_view v) { *p = parse_number<T>(name, v); }});
  };
  auto flag = [&t](std::string name, bool& ref) {
    bool* p = &ref;
    t.emplace_back(name, Field{[p] { return std::string(*p ? "true" : "false"); },
                               [p, name](std::string_view v) { *p = parse_bool(name, v); }});
  };

  num("epochs", c.epochs);
  num("batch_size", c.batch_size);
  num("lr", c.lr);
  num("weight_decay", c.weight_decay);
  num("warmup_epochs", c.warmup_epochs);
  num("beta", c.beta);
  num("gamma", c.gamma);
  num("eta", c.eta);
  flag("entropy_penalty", c.entropy_penalty);
  num("entropy_low", c.entropy_low);
  num("entropy_high", c.entropy_high);
  num("diversity_margin", c.diversity_margin);
  num("lambda_max", c.lambda_max);
  num("t_anneal", c.t_anneal);
  flag("anneal", c.anneal);
  num("ema_decay", c.ema_decay);
  flag("ema_warmup", c.ema_warmup);
  num("early_stop_patience", c.early_stop_patience);
  num("seed", c.seed);
  flag("tta_enabled", c.tta_enabled);
  flag("val_tta", c.val_tta);
  {
    Readout* p = &c.readout;
    t.emplace_back("readout", Field{[p] { return std::string(*p == Readout::kArgmax ? "argmax" : "threshold"); },
                                    [p](std::string_view v) {
                                      if (v == "argmax") *p = Readout::kArgmax;
                                      else if (v == "threshold") *p = Readout::kThresholdCount;
                                      else bad_value("readout", v);
                                    }});
  }
  num("num_classes", c.num_classes);
  num("stage_select", c.stage_select);
  num("num_queries", c.num_queries);
  num("input_side", c.input_side);
  num("backbone_width", c.backbone_width);
  num("backbone_depth", c.backbone_depth);
  num("query_dim", c.query_dim);
  num("decoder_depth", c.decoder_depth);
  num("temperature", c.temperature);
  num("temperature_end", c.temperature_end);
  num("query_dropout", c.query_dropout);

  flag("augment.enabled", c.augment_enabled);
  AugmentConfig& a = c.augment;
  num("augment.clahe_prob", a.clahe_prob);
  num("augment.flip_prob", a.flip_prob);
  num("augment.brightness_contrast_prob", a.brightness_contrast_prob);
  num("augment.hue_sat_prob", a.hue_sat_prob);
  num("augment.noise_prob", a.noise_prob);
  num("augment.blur_prob", a.blur_prob);
  num("augment.clahe_clip_limit", a.clahe_clip_limit);
  num("augment.clahe_tile_grid", a.clahe_tile_grid);
  num("augment.mixup_alpha", a.mixup_alpha);
  num("augment.cutmix_alpha", a.cutmix_alpha);
  num("augment.mix_prob", a.mix_prob);
  num("augment.brightness_range", a.brightness_range);
  num("augment.contrast_range", a.contrast_range);
  num("augment.hue_degrees", a.hue_degrees);
  num("augment.saturation_range", a.saturation_range);
  num("augment.noise_sigma_max", a.noise_sigma_max);
  num("augment.blur_sigma_max", a.blur_sigma_max);

  {
    std::string* p = &c.data_dir;
    t.emplace_back("data_dir", Field{[p] { return *p; }, [p](std::string_view v) { *p = std::string(v); }});
  }
  SyntheticSpec& s = c.synthetic;
  num("synthetic.images_per_grade", s.images_per_grade);
  num("synthetic.side", s.side);
  {
    auto* p = &s.blob_counts;
    t.emplace_back("synthetic.blob_counts",
                   Field{[p] { return format_ranges(*p); },
                         [p](std::string_view v) { *p = parse_ranges("synthetic.blob_counts", v); }});
  }
  num("synthetic.blob_radius_min", s.blob_radius_min);
  num("synthetic.blob_radius_max", s.blob_radius_max);
  num("synthetic.blob_intensity_min", s.blob_intensity_min);
  num("synthetic.blob_intensity_max", s.blob_intensity_max);
  num("synthetic.background_min", s.background_min);
  num("synthetic.background_max", s.background_max);
  num("synthetic.noise_sigma", s.noise_sigma);
  return t;
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidInput(std::string("invalid config: ") + what);
  };
  require(epochs > 0, "epochs must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(lr > 0.0, "lr must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(warmup_epochs >= 0.0, "warmup_epochs must be non-negative");
  require(beta >= 0.0 && gamma >= 0.0 && eta >= 0.0, "regularizer weights must be non-negative");
  require(0.0 <= entropy_low && entropy_low <= entropy_high && entropy_high <= 1.0,
          "entropy band fractions must satisfy 0 <= low <= high <= 1");
  require(lambda_max >= 0.0, "lambda_max must be non-negative");
  require(t_anneal > 0.0, "t_anneal must be positive");
  require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must lie in [0,1)");
  require(early_stop_patience > 0, "early_stop_patience must be positive");
  require(temperature_end >= 0.0, "temperature_end must be non-negative");
  model_config().validate();
  augment.validate();
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.backbone.input_side = input_side;
  for (int i = 0; i < kNumStages; ++i) {
    m.backbone.widths[i] = backbone_width << i;
    m.backbone.depths[i] = backbone_depth;
  }
  m.stage = stage_select;
  m.lqap.num_queries = num_queries;
  m.lqap.dim = query_dim;
  m.lqap.depth = decoder_depth;
  m.lqap.temperature = temperature;
  m.lqap.query_dropout = query_dropout;
  m.num_classes = num_classes;
  return m;
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k = trim(key), v = trim(value);
  for (auto& [name, field] : fields(cfg)) {
    if (name == k) {
      field.set(v);
      return;
    }
  }
  throw InvalidInput("unknown config key '" + k + "'");
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(cfg, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::map<std::string, std::string> config_entries(const TrainConfig& cfg) {
  TrainConfig copy = cfg;
  std::map<std::string, std::string> out;
  for (auto& [name, field] : fields(copy)) out[name] = field.get();
  return out;
}

std::string dump_config(const TrainConfig& cfg) {
  TrainConfig copy = cfg;
  std::string out;
  for (auto& [name, field] : fields(copy)) out += name + " = " + field.get() + '\n';
  return out;
}

}  // namespace lqe
