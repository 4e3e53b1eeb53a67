#include "nda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nda/error.hpp"

namespace nda {

double auroc(std::span<const ScoredSample> samples) {
  std::vector<double> pos, neg;
  for (const auto &s : samples) {
    if (!std::isfinite(s.score)) throw ArgumentError("auroc: non-finite score");
    (s.label == Label::Positive ? pos : neg).push_back(s.score);
  }
  return auroc(pos, neg);
}

double auroc(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw ArgumentError("auroc needs at least one positive and one negative sample");
  }
  // Twice the Mann-Whitney U so ties stay integral.
  long long twice_u = 0;
  for (double p : positive_scores) {
    if (!std::isfinite(p)) throw ArgumentError("auroc: non-finite score");
    for (double n : negative_scores) {
      if (!std::isfinite(n)) throw ArgumentError("auroc: non-finite score");
      twice_u += p > n ? 2 : (p == n ? 1 : 0);
    }
  }
  const auto twice_pairs = 2LL * static_cast<long long>(positive_scores.size()) *
                          static_cast<long long>(negative_scores.size());
  // The smaller tail is rounded to a multiple of 2^-53, so 1 - tail is exact and
  // swapping the labels gives exactly 1 - auroc.
  const long long tail = std::min(twice_u, twice_pairs - twice_u);
  const double r = std::ldexp(
      std::nearbyint(std::ldexp(static_cast<double>(tail) / static_cast<double>(twice_pairs), 53)), -53);
  return twice_u <= twice_pairs - twice_u ? r : 1.0 - r;
}

int count_components(const Image &img, double threshold, int min_area) {
  if (img.channels() != 1) throw DimensionError("count_components expects a grayscale image");
  const int h = img.height(), w = img.width();
  std::vector<char> visited(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);
  std::vector<std::pair<int, int>> stack;
  int components = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const auto start = static_cast<std::size_t>(y0 * w + x0);
      if (visited[start] || !(img.at(y0, x0) > threshold)) continue;
      visited[start] = 1;
      stack.assign(1, {y0, x0});
      int area = 0;
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        ++area;
        constexpr int dy[4] = {-1, 1, 0, 0};
        constexpr int dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const auto idx = static_cast<std::size_t>(ny * w + nx);
          if (visited[idx] || !(img.at(ny, nx) > threshold)) continue;
          visited[idx] = 1;
          stack.emplace_back(ny, nx);
        }
      }
      if (area >= min_area) ++components;
    }
  }
  return components;
}

Histogram histogram(std::span<const double> values, int bins) {
  if (values.empty()) throw ArgumentError("histogram of empty input");
  if (bins < 1) throw ArgumentError("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ArgumentError("histogram of non-finite values");
  Histogram out;
  out.counts.assign(static_cast<std::size_t>(bins), 0);
  out.edges.resize(static_cast<std::size_t>(bins) + 1);
  const double width = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) out.edges[static_cast<std::size_t>(i)] = lo + width * i;
  out.edges.back() = hi;
  for (double v : values) {
    int b = width > 0.0 ? static_cast<int>((v - lo) / width) : 0;
    b = std::clamp(b, 0, bins - 1);
    // Floating division can land one bin off at an edge; settle against the stored edges.
    while (b > 0 && v < out.edges[static_cast<std::size_t>(b)]) --b;
    while (b < bins - 1 && v >= out.edges[static_cast<std::size_t>(b) + 1]) ++b;
    ++out.counts[static_cast<std::size_t>(b)];
  }
  return out;
}

std::map<long, long> integer_histogram(std::span<const long> values) {
  if (values.empty()) throw ArgumentError("histogram of empty input");
  std::map<long, long> counts;
  for (long v : values) ++counts[v];
  return counts;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mean of empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

} // namespace nda
