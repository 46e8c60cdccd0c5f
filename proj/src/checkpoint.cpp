#include "dfa/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "dfa/config.hpp"
#include "dfa/error.hpp"

namespace dfa {

namespace {

template <typename T>
struct NamedTensor {
  std::string name;
  const Tensor<T>* tensor;
};

template <typename T>
std::vector<NamedTensor<T>> tensors_of(const Network<T>& net) {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 1; i <= net.layer_count(); ++i) {
    const Block<T>& b = net.layer(i);
    const std::string p = "layer" + std::to_string(i) + ".";
    out.push_back({p + "weight", &b.weights()});
    out.push_back({p + "bias", &b.bias()});
    if (const auto* bn = b.batchnorm()) {
      out.push_back({p + "gamma", &bn->gamma()});
      out.push_back({p + "beta", &bn->beta()});
      out.push_back({p + "running_mean", &bn->running_mean()});
      out.push_back({p + "running_var", &bn->running_var()});
    }
  }
  return out;
}

template <typename T>
Tensor<T>& mutable_tensor(Network<T>& net, const std::string& name) {
  const auto dot = name.find('.');
  if (!name.starts_with("layer") || dot == std::string::npos)
    throw FormatError("checkpoint: bad tensor name " + name);
  const std::size_t layer = std::stoul(name.substr(5, dot - 5));
  if (layer == 0 || layer > net.layer_count())
    throw FormatError("checkpoint: tensor for missing layer " + name);
  Block<T>& b = net.layer(layer);
  const std::string field = name.substr(dot + 1);
  if (field == "weight") return b.weights();
  if (field == "bias") return b.bias();
  BatchNorm<T>* bn = b.batchnorm();
  if (!bn) throw FormatError("checkpoint: layer without batchnorm has " + name);
  if (field == "gamma") return bn->gamma();
  if (field == "beta") return bn->beta();
  if (field == "running_mean") return bn->running_mean();
  if (field == "running_var") return bn->running_var();
  throw FormatError("checkpoint: unknown tensor " + name);
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

Shape parse_shape(const std::string& text) {
  Shape s;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, 'x')) s.push_back(std::stoul(part));
  return s;
}

template <typename U, typename T>
void write_values(std::ostream& out, const Tensor<T>& t) {
  using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
  std::vector<unsigned char> buf(t.size() * sizeof(U));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Bits bits = std::bit_cast<Bits>(static_cast<U>(t[i]));
    for (std::size_t b = 0; b < sizeof(U); ++b) buf[i * sizeof(U) + b] = (bits >> (8 * b)) & 0xff;
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

template <typename U, typename T>
void read_values(std::istream& in, Tensor<T>& t) {
  using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
  std::vector<unsigned char> buf(t.size() * sizeof(U));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw FormatError("checkpoint: truncated payload");
  for (std::size_t i = 0; i < t.size(); ++i) {
    Bits bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) bits |= Bits{buf[i * sizeof(U) + b]} << (8 * b);
    t[i] = static_cast<T>(std::bit_cast<U>(bits));
  }
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Network<T>& net,
                     const std::string& note) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out << "dfa-checkpoint 1\n"
      << "precision " << (sizeof(T) == 4 ? "float" : "double") << '\n';
  if (!note.empty()) out << "note " << note << '\n';
  out << "input " << shape_text(net.input_shape()) << '\n';
  for (const auto& c : net.configs()) out << "block " << render_block(c) << '\n';
  for (std::size_t i = 1; i <= net.layer_count(); ++i)
    if (const auto* bn = net.layer(i).batchnorm(); bn && bn->has_running_stats())
      out << "running " << i << '\n';
  const auto tensors = tensors_of(net);
  for (const auto& t : tensors) out << "tensor " << t.name << ' ' << shape_text(t.tensor->shape()) << '\n';
  out << "end\n";
  for (const auto& t : tensors) write_values<T>(out, *t.tensor);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "dfa-checkpoint 1")
    throw FormatError("checkpoint: " + path.string() + " is not a version 1 checkpoint");
  std::string precision;
  Shape input;
  std::vector<BlockConfig> blocks;
  std::vector<std::size_t> running;
  std::vector<std::pair<std::string, Shape>> entries;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "precision") precision = rest;
    else if (key == "note") continue;
    else if (key == "input") input = parse_shape(rest);
    else if (key == "block") blocks.push_back(parse_block_line(rest));
    else if (key == "running") running.push_back(std::stoul(rest));
    else if (key == "tensor") {
      const auto sp2 = rest.find(' ');
      if (sp2 == std::string::npos) throw FormatError("checkpoint: bad tensor line");
      entries.emplace_back(rest.substr(0, sp2), parse_shape(rest.substr(sp2 + 1)));
    } else {
      throw FormatError("checkpoint: unknown header line '" + line + "'");
    }
  }
  if (!ended) throw FormatError("checkpoint: header has no end line");
  if (precision != "float" && precision != "double")
    throw FormatError("checkpoint: unknown precision '" + precision + "'");

  Network<T> net(input, blocks, 0);
  for (const auto& [name, shape] : entries) {
    Tensor<T>& t = mutable_tensor(net, name);
    if (t.shape() != shape) throw FormatError("checkpoint: shape mismatch for " + name);
    if (precision == "float") read_values<float>(in, t);
    else read_values<double>(in, t);
  }
  for (std::size_t layer : running) {
    if (layer == 0 || layer > net.layer_count() || !net.layer(layer).batchnorm())
      throw FormatError("checkpoint: running stats for a layer without batchnorm");
    net.layer(layer).batchnorm()->set_has_running_stats(true);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return net;
}

template void save_checkpoint(const std::filesystem::path&, const Network<float>&, const std::string&);
template void save_checkpoint(const std::filesystem::path&, const Network<double>&, const std::string&);
template Network<float> load_checkpoint(const std::filesystem::path&);
template Network<double> load_checkpoint(const std::filesystem::path&);

}  // namespace dfa
