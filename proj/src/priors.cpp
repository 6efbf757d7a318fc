#include "fbal/priors.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fbal {

namespace {

double parse_number(std::string_view s, std::string_view whole) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad prior name: " + std::string(whole));
  return v;
}

std::vector<std::string_view> split_dash(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '-') {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

}  // namespace

ScalePrior ScalePrior::half_normal(double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("half-normal scale must be positive");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, scale);
  return ScalePrior(Kind::kHalfNormal, scale, 0.0, "half-normal-" + std::string(buf, res.ptr));
}

ScalePrior ScalePrior::log_normal(double location, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("log-normal scale must be positive");
  char a[64], b[64];
  auto ra = std::to_chars(a, a + sizeof a, location);
  auto rb = std::to_chars(b, b + sizeof b, scale);
  return ScalePrior(Kind::kLogNormal, location, scale,
                    "log-normal-" + std::string(a, ra.ptr) + "-" + std::string(b, rb.ptr));
}

ScalePrior ScalePrior::parse(std::string_view name) {
  const auto parts = split_dash(name);
  if (parts.size() == 3 && parts[0] == "half" && parts[1] == "normal")
    return half_normal(parse_number(parts[2], name));
  if (parts.size() == 4 && parts[0] == "log" && parts[1] == "normal")
    return log_normal(parse_number(parts[2], name), parse_number(parts[3], name));
  throw std::invalid_argument("unknown prior: " + std::string(name));
}

std::string ScalePrior::name() const { return label_; }

double ScalePrior::log_density(double value) const {
  if (!(value > 0.0)) return -INFINITY;
  if (kind_ == Kind::kHalfNormal) {
    const double z = value / a_;
    return std::numbers::ln2 - kHalfLog2Pi - std::log(a_) - 0.5 * z * z;
  }
  const double lv = std::log(value);
  const double z = (lv - a_) / b_;
  return -lv - kHalfLog2Pi - std::log(b_) - 0.5 * z * z;
}

double ScalePrior::log_density_of_log(double u, double* d_du) const {
  if (kind_ == Kind::kHalfNormal) {
    const double v = std::exp(u);
    const double z = v / a_;
    if (d_du) *d_du = 1.0 - z * z;
    return std::numbers::ln2 - kHalfLog2Pi - std::log(a_) - 0.5 * z * z + u;
  }
  // The log-normal density of u is an ordinary normal.
  const double z = (u - a_) / b_;
  if (d_du) *d_du = -z / b_;
  return -kHalfLog2Pi - std::log(b_) - 0.5 * z * z;
}

double ScalePrior::sample(Rng& rng) const {
  if (kind_ == Kind::kHalfNormal) return std::abs(rng.normal()) * a_;
  return std::exp(a_ + b_ * rng.normal());
}

}  // namespace fbal
