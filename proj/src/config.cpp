#include "dfa/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "dfa/error.hpp"
#include "dfa/format.hpp"

namespace dfa {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ParameterError("config line " + std::to_string(line) + ": " + msg);
}

std::uint64_t to_u64(std::string_view v, std::size_t line) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    fail(line, "expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

double to_double(std::string_view v, std::size_t line) {
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    fail(line, "expected a number, got '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view v, std::size_t line) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  fail(line, "expected on/off, got '" + std::string(v) + "'");
}

Shape to_shape(std::string_view v, std::size_t line) {
  Shape s;
  std::size_t b = 0;
  while (b <= v.size()) {
    auto e = v.find('x', b);
    if (e == std::string_view::npos) e = v.size();
    const std::uint64_t d = to_u64(v.substr(b, e - b), line);
    if (d == 0) fail(line, "zero extent in input shape");
    s.push_back(d);
    b = e + 1;
  }
  return s;
}

AugmentSpec to_augment(std::string_view v, std::size_t line, AugmentSpec spec) {
  spec.crop = spec.flip = false;
  if (v == "none") return spec;
  std::size_t b = 0;
  while (b <= v.size()) {
    auto e = v.find('+', b);
    if (e == std::string_view::npos) e = v.size();
    const auto part = v.substr(b, e - b);
    if (part == "crop") spec.crop = true;
    else if (part == "flip") spec.flip = true;
    else fail(line, "augment takes none, crop, flip or crop+flip");
    b = e + 1;
  }
  return spec;
}

struct BlockLine {
  BlockConfig config;
  bool has_act = false, has_dropout = false, has_bn = false;
};

BlockLine parse_block(std::string_view text, std::size_t line) {
  const auto tok = split_ws(text);
  if (tok.empty()) fail(line, "empty block line");
  BlockLine out;
  BlockConfig& c = out.config;
  const auto kind = tok[0];
  std::size_t first_opt = 1;
  if (kind == "fc" || kind == "conv") {
    c.kind = kind == "fc" ? BlockKind::fc : BlockKind::conv;
    if (tok.size() < 2) fail(line, std::string(kind) + " needs a unit count");
    c.units = to_u64(tok[1], line);
    if (c.units == 0) fail(line, "unit count must be positive");
    first_opt = 2;
  } else if (kind == "maxpool") {
    c.kind = BlockKind::maxpool;
  } else if (kind == "dropout") {
    c.kind = BlockKind::dropout;
    if (tok.size() < 2) fail(line, "dropout needs a rate");
    c.dropout_rate = to_double(tok[1], line);
    out.has_dropout = true;
    first_opt = 2;
  } else {
    fail(line, "unknown block '" + std::string(kind) + "'");
  }
  for (std::size_t i = first_opt; i < tok.size(); ++i) {
    const auto eq = tok[i].find('=');
    if (eq == std::string_view::npos || !c.has_parameters())
      fail(line, "unexpected '" + std::string(tok[i]) + "'");
    const auto key = tok[i].substr(0, eq);
    const auto val = tok[i].substr(eq + 1);
    if (key == "act") {
      c.activation = Activation::parse(val);
      out.has_act = true;
    } else if (key == "dropout") {
      c.dropout_rate = to_double(val, line);
      out.has_dropout = true;
    } else if (key == "bn") {
      c.batchnorm = to_bool(val, line);
      out.has_bn = true;
    } else if (c.kind == BlockKind::conv && key == "kernel") {
      c.kernel = to_u64(val, line);
    } else if (c.kind == BlockKind::conv && key == "stride") {
      c.stride = to_u64(val, line);
    } else if (c.kind == BlockKind::conv && key == "pad") {
      c.pad = to_u64(val, line);
    } else {
      fail(line, "unknown block option '" + std::string(key) + "'");
    }
  }
  if (!(c.dropout_rate >= 0 && c.dropout_rate < 1)) fail(line, "dropout must lie in [0, 1)");
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  Activation default_act{ActivationKind::tanh, 0.0};
  double default_dropout = 0, input_dropout = 0;
  bool default_bn = false;
  std::optional<std::size_t> mask_layer, mask_count;
  std::vector<BlockLine> lines;
  std::vector<std::string> unknown;
  bool in_arch = false, have_input = false;

  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line == "[architecture]") {
      in_arch = true;
      continue;
    }
    if (line.front() == '[') fail(lineno, "unknown section " + std::string(line));
    const auto eq = line.find('=');
    const bool assignment = eq != std::string_view::npos &&
                            trim(line.substr(0, eq)).find(' ') == std::string_view::npos;
    if (in_arch && !(assignment && trim(line.substr(0, eq)) == "input")) {
      lines.push_back(parse_block(line, lineno));
      continue;
    }
    if (eq == std::string_view::npos) fail(lineno, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto val = trim(line.substr(eq + 1));
    if (key == "input") {
      cfg.input_shape = to_shape(val, lineno);
      have_input = true;
    } else if (key == "seed") t.seed = to_u64(val, lineno);
    else if (key == "algorithm") t.algorithm = parse_algorithm(val);
    else if (key == "learning_rate") t.learning_rate = to_double(val, lineno);
    else if (key == "epochs") t.epochs = to_u64(val, lineno);
    else if (key == "batch_size") t.batch_size = to_u64(val, lineno);
    else if (key == "lr_schedule") {
      if (val != "constant" && val != "plateau") fail(lineno, "lr_schedule is constant or plateau");
      t.plateau = val == "plateau";
    } else if (key == "patience") t.patience = to_u64(val, lineno);
    else if (key == "factor") t.factor = to_double(val, lineno);
    else if (key == "feedback_normalization") t.feedback_normalization = to_bool(val, lineno);
    else if (key == "parallel_backward") t.parallel_backward = to_bool(val, lineno);
    else if (key == "probe_every") t.probe_every = to_u64(val, lineno);
    else if (key == "probe_batch") t.probe_batch = to_u64(val, lineno);
    else if (key == "augment") t.augment = to_augment(val, lineno, t.augment);
    else if (key == "augment_pad") t.augment.pad = to_u64(val, lineno);
    else if (key == "augment_crop") {
      const Shape s = to_shape(val, lineno);
      if (s.size() != 2) fail(lineno, "augment_crop is HxW");
      t.augment.crop_h = s[0];
      t.augment.crop_w = s[1];
    } else if (key == "mask_layer") mask_layer = to_u64(val, lineno);
    else if (key == "mask_count") mask_count = to_u64(val, lineno);
    else if (key == "bottleneck_layer") cfg.bottleneck_layer = to_u64(val, lineno);
    else if (key == "dataset") {
      if (val != "mnist" && val != "cifar10" && val != "cifar100" && val != "synthetic")
        fail(lineno, "dataset is mnist, cifar10, cifar100 or synthetic");
      cfg.dataset = val;
    } else if (key == "train_subset") cfg.train_subset = to_u64(val, lineno);
    else if (key == "test_subset") cfg.test_subset = to_u64(val, lineno);
    else if (key == "standardize") cfg.standardize = to_bool(val, lineno);
    else if (key == "precision") {
      if (val != "float" && val != "double") fail(lineno, "precision is float or double");
      cfg.precision = val;
    } else if (key == "checkpoint") cfg.checkpoint = to_bool(val, lineno);
    else if (key == "bytes_per_element") cfg.bytes_per_element = to_u64(val, lineno);
    else if (key == "activation") default_act = Activation::parse(val);
    else if (key == "dropout") default_dropout = to_double(val, lineno);
    else if (key == "input_dropout") input_dropout = to_double(val, lineno);
    else if (key == "batchnorm") default_bn = to_bool(val, lineno);
    else unknown.emplace_back(key);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ParameterError(msg);
  }
  if (!have_input) throw ParameterError("config: [architecture] needs input = CxHxW");
  if (lines.empty()) throw ParameterError("config: [architecture] lists no blocks");
  if (!(input_dropout >= 0 && input_dropout < 1) || !(default_dropout >= 0 && default_dropout < 1))
    throw ParameterError("config: dropout must lie in [0, 1)");

  std::size_t last_param = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i].config.has_parameters()) last_param = i;
  if (input_dropout > 0) {
    BlockConfig d;
    d.kind = BlockKind::dropout;
    d.dropout_rate = input_dropout;
    cfg.blocks.push_back(d);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    BlockConfig c = lines[i].config;
    if (c.has_parameters() && i != last_param) {
      if (!lines[i].has_act) c.activation = default_act;
      if (!lines[i].has_dropout) c.dropout_rate = default_dropout;
      if (!lines[i].has_bn) c.batchnorm = default_bn;
    }
    cfg.blocks.push_back(c);
  }
  if (mask_count && !mask_layer) throw ParameterError("config: mask_count needs mask_layer");
  if (mask_layer) t.mask = MaskConfig{*mask_layer, mask_count.value_or(0)};
  if (t.batch_size == 0) throw ParameterError("config: batch_size must be >= 1");
  if (!(t.learning_rate >= 0)) throw ParameterError("config: learning_rate must be >= 0");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_block(const BlockConfig& b) {
  if (!b.has_parameters()) return b.describe();
  std::ostringstream os;
  os << to_string(b.kind) << ' ' << b.units;
  if (b.kind == BlockKind::conv)
    os << " kernel=" << b.kernel << " stride=" << b.stride << " pad=" << b.pad;
  os << " act=" << b.activation.name() << " dropout=" << format_number(b.dropout_rate)
     << " bn=" << (b.batchnorm ? "on" : "off");
  return os.str();
}

BlockConfig parse_block_line(std::string_view line) { return parse_block(trim(line), 0).config; }

std::string render_config(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  auto onoff = [](bool b) { return b ? "on" : "off"; };
  std::ostringstream os;
  os << "seed = " << t.seed << '\n'
     << "algorithm = " << to_string(t.algorithm) << '\n'
     << "learning_rate = " << format_number(t.learning_rate) << '\n'
     << "epochs = " << t.epochs << '\n'
     << "batch_size = " << t.batch_size << '\n'
     << "lr_schedule = " << (t.plateau ? "plateau" : "constant") << '\n'
     << "patience = " << t.patience << '\n'
     << "factor = " << format_number(t.factor) << '\n'
     << "feedback_normalization = " << onoff(t.feedback_normalization) << '\n'
     << "parallel_backward = " << onoff(t.parallel_backward) << '\n'
     << "probe_every = " << t.probe_every << '\n'
     << "probe_batch = " << t.probe_batch << '\n';
  std::string aug = "none";
  if (t.augment.crop && t.augment.flip) aug = "crop+flip";
  else if (t.augment.crop) aug = "crop";
  else if (t.augment.flip) aug = "flip";
  os << "augment = " << aug << '\n' << "augment_pad = " << t.augment.pad << '\n';
  if (t.augment.crop_h) os << "augment_crop = " << t.augment.crop_h << 'x' << t.augment.crop_w << '\n';
  if (t.mask) os << "mask_layer = " << t.mask->layer << '\n' << "mask_count = " << t.mask->masked << '\n';
  os << "bottleneck_layer = " << c.bottleneck_layer << '\n'
     << "dataset = " << c.dataset << '\n'
     << "train_subset = " << c.train_subset << '\n'
     << "test_subset = " << c.test_subset << '\n'
     << "standardize = " << onoff(c.standardize) << '\n'
     << "precision = " << c.precision << '\n'
     << "checkpoint = " << onoff(c.checkpoint) << '\n'
     << "bytes_per_element = " << c.bytes_per_element << '\n'
     << "[architecture]\n"
     << "input = ";
  for (std::size_t i = 0; i < c.input_shape.size(); ++i) os << (i ? "x" : "") << c.input_shape[i];
  os << '\n';
  for (const auto& b : c.blocks) os << render_block(b) << '\n';
  return os.str();
}

}  // namespace dfa
