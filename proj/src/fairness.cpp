// Copyright 2026 The lowshot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lowshot/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <tuple>

#include "lowshot/common.hpp"

namespace lowshot {

using nlohmann::json;

namespace {

double srgb_to_linear(std::uint8_t v) {
  const double c = v / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double kDelta = 6.0 / 29.0;
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Rate as (numerator, denominator) counts.
using Ratio = std::pair<long long, long long>;

/// Largest pairwise |p/q - r/s|, computed as one division of exact integers
/// so hand-countable gaps come out correctly rounded.
std::optional<double> max_gap(const std::vector<Ratio>& rates) {
  if (rates.size() < 2) return std::nullopt;
  long long best_num = 0, best_den = 1;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    for (std::size_t j = i + 1; j < rates.size(); ++j) {
      const long long num = std::llabs(rates[i].first * rates[j].second - rates[j].first * rates[i].second);
      const long long den = rates[i].second * rates[j].second;
      if (num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
      }
    }
  }
  return static_cast<double>(best_num) / static_cast<double>(best_den);
}

std::string opt_field(const std::optional<double>& v) {
  return v ? format_fixed(*v, 6) : std::string();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / 0.95047), fy = lab_f(y / 1.0), fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

void ItaThresholds::validate() const {
  const double t[] = {very_light, light, intermediate, tan, brown};
  for (std::size_t i = 0; i < 5; ++i) {
    if (!(t[i] > -90.0 && t[i] < 90.0)) throw ConfigError("ITA thresholds must lie in (-90, 90)");
    if (i > 0 && !(t[i] < t[i - 1])) throw ConfigError("ITA thresholds must be strictly decreasing");
  }
}

json to_json(const ItaThresholds& t) {
  return json{{"very_light", t.very_light}, {"light", t.light}, {"intermediate", t.intermediate},
              {"tan", t.tan}, {"brown", t.brown}};
}

ItaThresholds ita_thresholds_from_json(const json& j) {
  ItaThresholds t;
  for (const auto& [key, value] : j.items()) {
    if (key == "very_light") t.very_light = value.get<double>();
    else if (key == "light") t.light = value.get<double>();
    else if (key == "intermediate") t.intermediate = value.get<double>();
    else if (key == "tan") t.tan = value.get<double>();
    else if (key == "brown") t.brown = value.get<double>();
    else throw ConfigError("ita_thresholds: unknown key '" + key + "'");
  }
  t.validate();
  return t;
}

SkinToneBin bin_ita(double ita, const ItaThresholds& t) {
  if (ita >= t.very_light) return SkinToneBin::very_light;
  if (ita >= t.light) return SkinToneBin::light;
  if (ita >= t.intermediate) return SkinToneBin::intermediate;
  if (ita >= t.tan) return SkinToneBin::tan;
  if (ita >= t.brown) return SkinToneBin::brown;
  return SkinToneBin::dark;
}

ToneEstimate estimate_ita_lab(std::span<const Lab> pixels, const ItaThresholds& t) {
  std::vector<double> angles;
  angles.reserve(pixels.size());
  for (const Lab& p : pixels) {
    if (p.b == 0.0) continue;
    angles.push_back(std::atan((p.L - 50.0) / p.b) * 180.0 / M_PI);
  }
  if (angles.empty()) throw DataError("estimate_ita: every pixel has b* = 0; the angle is undefined");
  ToneEstimate e;
  e.n_pixels_used = static_cast<int>(angles.size());
  e.ita_degrees = median_of(std::move(angles));
  e.bin = bin_ita(e.ita_degrees, t);
  return e;
}

ToneEstimate estimate_ita(const Raster& img, const std::optional<PixelMask>& mask,
                          const ItaOptions& opt) {
  if (img.empty()) throw DataError("estimate_ita: empty image");
  std::vector<Lab> lab;
  if (mask) {
    if (mask->empty()) throw DataError("estimate_ita: empty mask");
    for (const auto& [y, x] : *mask) {
      if (y < 0 || x < 0 || y >= img.height || x >= img.width) {
        throw DataError("estimate_ita: mask pixel out of bounds");
      }
      lab.push_back(srgb_to_lab(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)));
    }
  } else {
    if (!(opt.bright_fraction > 0.0 && opt.bright_fraction <= 1.0)) {
      throw ConfigError("estimate_ita: bright_fraction must be in (0, 1]");
    }
    std::vector<Lab> all;
    all.reserve(static_cast<std::size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) all.push_back(srgb_to_lab(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)));
    }
    // The kept set depends only on the multiset of pixel values, so
    // rotations and flips give the same estimate.
    std::sort(all.begin(), all.end(), [](const Lab& p, const Lab& q) {
      return std::tie(q.L, q.a, q.b) < std::tie(p.L, p.a, p.b);
    });
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(opt.bright_fraction * static_cast<double>(all.size()))));
    lab.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return estimate_ita_lab(lab, opt.thresholds);
}

SubgroupReport subgroup_report(const std::vector<int>& pred, const std::vector<int>& truth,
                               const std::vector<SkinToneBin>& bins, int n_min, int positive_class) {
  if (pred.size() != truth.size() || pred.size() != bins.size()) {
    throw Error("subgroup_report: predictions, labels and bins differ in length");
  }
  if (n_min < 1) throw ConfigError("subgroup_report: n_min must be >= 1");
  SubgroupReport r;
  r.n = static_cast<int>(pred.size());
  r.n_min = n_min;
  r.positive_class = positive_class;
  r.binary = std::all_of(truth.begin(), truth.end(), [](int y) { return y == 0 || y == 1; }) &&
             std::all_of(pred.begin(), pred.end(), [](int y) { return y == 0 || y == 1; });

  int correct = 0;
  for (SkinToneBin b : kAllToneBins) {
    BinMetrics m;
    m.bin = b;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (bins[i] != b) continue;
      ++m.n;
      const bool hit = pred[i] == truth[i];
      m.n_correct += hit ? 1 : 0;
      if (r.binary) {
        const bool pos = truth[i] == positive_class;
        const bool said_pos = pred[i] == positive_class;
        if (pos) (said_pos ? m.tp : m.fn) += 1;
        else (said_pos ? m.fp : m.tn) += 1;
      }
    }
    if (m.n == 0) continue;
    correct += m.n_correct;
    m.accuracy = static_cast<double>(m.n_correct) / m.n;
    if (r.binary) {
      if (m.tp + m.fn > 0) m.tpr = static_cast<double>(m.tp) / (m.tp + m.fn);
      if (m.fp + m.tn > 0) m.fpr = static_cast<double>(m.fp) / (m.fp + m.tn);
    }
    m.small_n = m.n < n_min;
    r.bins.push_back(m);
  }
  r.overall_accuracy = r.n > 0 ? static_cast<double>(correct) / r.n : 0.0;

  std::vector<Ratio> acc, tpr, fpr;
  for (const auto& m : r.bins) {
    if (m.small_n) continue;
    acc.emplace_back(m.n_correct, m.n);
    if (m.tpr) tpr.emplace_back(m.tp, m.tp + m.fn);
    if (m.fpr) fpr.emplace_back(m.fp, m.fp + m.tn);
  }
  r.gaps.accuracy = max_gap(acc);
  if (r.binary) {
    r.gaps.tpr = max_gap(tpr);
    r.gaps.fpr = max_gap(fpr);
  }
  return r;
}

json to_json(const SubgroupReport& r, const ItaThresholds& t) {
  json bins = json::array();
  for (const auto& m : r.bins) {
    json jb{{"bin", to_string(m.bin)},  {"n", m.n},
            {"n_correct", m.n_correct}, {"accuracy", m.accuracy},
            {"small_n", m.small_n}};
    if (r.binary) {
      jb["tp"] = m.tp;
      jb["fn"] = m.fn;
      jb["fp"] = m.fp;
      jb["tn"] = m.tn;
      jb["tpr"] = opt_json(m.tpr);
      jb["fpr"] = opt_json(m.fpr);
    }
    bins.push_back(std::move(jb));
  }
  return json{{"n", r.n},
              {"overall_accuracy", r.overall_accuracy},
              {"binary", r.binary},
              {"positive_class", r.positive_class},
              {"n_min", r.n_min},
              {"bins", std::move(bins)},
              {"gaps",
               {{"accuracy", opt_json(r.gaps.accuracy)},
                {"tpr", opt_json(r.gaps.tpr)},
                {"fpr", opt_json(r.gaps.fpr)}}},
              {"ita_thresholds", to_json(t)}};
}

std::string render_audit_csv(const SubgroupReport& r) {
  std::ostringstream out;
  out << "bin,n,n_correct,accuracy,tpr,fpr,small_n\n";
  for (const auto& m : r.bins) {
    out << to_string(m.bin) << ',' << m.n << ',' << m.n_correct << ',' << format_fixed(m.accuracy, 6)
        << ',' << opt_field(m.tpr) << ',' << opt_field(m.fpr) << ',' << (m.small_n ? "true" : "false")
        << '\n';
  }
  const auto gap_row = [&](const char* name, const std::optional<double>& g) {
    out << "gap_" << name << ",,," << (g ? format_fixed(*g, 6) : "undefined") << ",,,\n";
  };
  gap_row("accuracy", r.gaps.accuracy);
  gap_row("tpr", r.gaps.tpr);
  gap_row("fpr", r.gaps.fpr);
  return out.str();
}

}  // namespace lowshot
