#include "htde/samples.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "htde/errors.hpp"

namespace htde {

SampleSet::SampleSet(Index d, Index alphabet, std::string model, double beta,
                     std::uint64_t seed)
    : d_(d), n_(alphabet), model_(std::move(model)), beta_(beta), seed_(seed) {
  if (d < 1) throw std::invalid_argument("SampleSet: d must be >= 1");
  if (alphabet < 2 || alphabet > 255)
    throw std::invalid_argument("SampleSet: alphabet must be in [2, 255]");
}

void SampleSet::reserve(Index count) {
  data_.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(d_));
}

void SampleSet::append(std::span<const std::uint8_t> config) {
  if (config.size() != static_cast<std::size_t>(d_))
    throw std::invalid_argument("SampleSet::append: configuration length mismatch");
  for (std::uint8_t v : config)
    if (v >= n_) throw std::invalid_argument("SampleSet::append: value out of alphabet");
  data_.insert(data_.end(), config.begin(), config.end());
  ++count_;
}

void SampleSet::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("SampleSet: cannot open " + path.string() + " for writing");
  out << "d,n,N,model,beta,seed\n";
  char beta_buf[64];
  std::snprintf(beta_buf, sizeof(beta_buf), "%.17g", beta_);
  out << d_ << ',' << n_ << ',' << count_ << ',' << model_ << ',' << beta_buf << ','
      << seed_ << '\n';
  for (Index i = 0; i < count_; ++i) {
    const auto row = config(i);
    for (Index j = 0; j < d_; ++j) {
      if (j) out << ',';
      if (n_ == 2)
        out << (row[static_cast<std::size_t>(j)] == 0 ? -1 : 1);
      else
        out << int(row[static_cast<std::size_t>(j)]) + 1;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("SampleSet: write failed for " + path.string());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

long long parse_int(const std::string& s, const char* what) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError(std::string("SampleSet: bad ") + what + " field '" + s + "'");
  return v;
}

}  // namespace

SampleSet SampleSet::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("SampleSet: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{
                                     "d", "n", "N", "model", "beta", "seed"})
    throw ConfigError("SampleSet: missing header in " + path.string());
  if (!std::getline(in, line)) throw ConfigError("SampleSet: missing metadata row");
  const auto meta = split_csv(line);
  if (meta.size() != 6) throw ConfigError("SampleSet: malformed metadata row");
  const Index d = parse_int(meta[0], "d");
  const Index n = parse_int(meta[1], "n");
  const Index count = parse_int(meta[2], "N");
  SampleSet set(d, n, meta[3], std::stod(meta[4]),
                static_cast<std::uint64_t>(parse_int(meta[5], "seed")));
  set.reserve(count);
  std::vector<std::uint8_t> config(static_cast<std::size_t>(d));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != static_cast<std::size_t>(d))
      throw ConfigError("SampleSet: row with " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(d));
    for (Index j = 0; j < d; ++j) {
      const long long raw = parse_int(fields[static_cast<std::size_t>(j)], "site value");
      long long v;
      if (n == 2) {
        if (raw != -1 && raw != 1)
          throw ConfigError("SampleSet: spin values must be -1 or +1");
        v = raw == -1 ? 0 : 1;
      } else {
        v = raw - 1;
        if (v < 0 || v >= n) throw ConfigError("SampleSet: site value out of range");
      }
      config[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(v);
    }
    set.append(config);
  }
  if (set.size() != count)
    throw ConfigError("SampleSet: expected " + std::to_string(count) + " rows, found " +
                      std::to_string(set.size()));
  return set;
}

SampleSet concat(const SampleSet& a, const SampleSet& b) {
  if (a.dimension() != b.dimension() || a.alphabet() != b.alphabet())
    throw std::invalid_argument("concat: sample sets are not compatible");
  SampleSet out(a.dimension(), a.alphabet(), a.model(), a.beta(), a.seed());
  out.reserve(a.size() + b.size());
  out.data_ = a.data_;
  out.data_.insert(out.data_.end(), b.data_.begin(), b.data_.end());
  out.count_ = a.count_ + b.count_;
  return out;
}

Vector empirical_density(const SampleSet& samples, Index entry_cap) {
  const Index d = samples.dimension();
  const Index n = samples.alphabet();
  double total = 1.0;
  for (Index i = 0; i < d; ++i) {
    total *= double(n);
    if (total > double(entry_cap))
      throw CapacityError("empirical_density: n^d exceeds the entry budget");
  }
  Vector density = Vector::Zero(static_cast<Index>(total));
  for (Index i = 0; i < samples.size(); ++i) {
    const auto row = samples.config(i);
    Index idx = 0;
    for (Index j = 0; j < d; ++j) idx = idx * n + row[static_cast<std::size_t>(j)];
    density(idx) += 1.0;
  }
  density /= double(samples.size());
  return density;
}

}  // namespace htde
