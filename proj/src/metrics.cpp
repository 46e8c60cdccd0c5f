#include "dfa/metrics.hpp"

#include <charconv>

#include "dfa/error.hpp"
#include "dfa/format.hpp"

namespace dfa {

std::vector<MetricRow> alignment_rows(const AlignmentRecord& r) {
  return {
      {r.step, r.epoch, r.layer, "align_cos", r.mean_cos, r.std_cos, r.n},
      {r.step, r.epoch, r.layer, "align_deg", r.degrees(), r.std_deg, r.n},
  };
}

std::vector<MetricRow> epoch_rows(const EpochMetrics& m) {
  std::vector<MetricRow> rows = {
      {m.step, m.epoch, 0, "train_loss", m.train_loss, std::nullopt, m.train_samples},
      {m.step, m.epoch, 0, "train_acc", m.train_accuracy, std::nullopt, m.train_samples},
      {m.step, m.epoch, 0, "test_loss", m.test_loss, std::nullopt, m.test_samples},
      {m.step, m.epoch, 0, "test_acc", m.test_accuracy, std::nullopt, m.test_samples},
      {m.step, m.epoch, 0, "lr", m.learning_rate, std::nullopt, 0},
  };
  for (const auto& rec : m.alignment)
    for (auto& row : alignment_rows(rec)) rows.push_back(std::move(row));
  return rows;
}

std::string format_row(const MetricRow& r) {
  std::string s = std::to_string(r.step) + ',' + std::to_string(r.epoch) + ',' +
                  std::to_string(r.layer) + ',' + r.metric + ',' + format_number(r.value) + ',';
  if (r.std) s += format_number(*r.std);
  s += ',' + std::to_string(r.n);
  return s;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("metrics: cannot write " + path.string());
  if (fresh) out_ << kMetricsHeader << '\n';
}

void MetricsWriter::write(const MetricRow& row) { out_ << format_row(row) << '\n'; }

void MetricsWriter::write(const std::vector<MetricRow>& rows) {
  for (const auto& r : rows) write(r);
}

void MetricsWriter::flush() {
  out_.flush();
  if (!out_) throw std::runtime_error("metrics: write failed");
}

namespace {

template <typename V>
V parse_field(std::string_view s, std::size_t line) {
  V v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError("metrics line " + std::to_string(line) + ": bad field '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<MetricRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("metrics: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw FormatError("metrics: missing header in " + path.string());
  std::vector<MetricRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::string_view> f;
    std::string_view rest = line;
    for (;;) {
      const auto c = rest.find(',');
      f.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest = rest.substr(c + 1);
    }
    if (f.size() != 7) throw FormatError("metrics line " + std::to_string(lineno) + ": expected 7 fields");
    MetricRow r;
    r.step = parse_field<std::size_t>(f[0], lineno);
    r.epoch = parse_field<std::size_t>(f[1], lineno);
    r.layer = parse_field<std::size_t>(f[2], lineno);
    r.metric = std::string(f[3]);
    r.value = parse_field<double>(f[4], lineno);
    if (!f[5].empty()) r.std = parse_field<double>(f[5], lineno);
    r.n = parse_field<std::size_t>(f[6], lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace dfa
