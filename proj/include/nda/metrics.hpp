#pragma once

#include <map>
#include <span>
#include <vector>

#include "nda/image.hpp"

namespace nda {

enum class Label { Positive, Negative };

struct ScoredSample {
  double score;
  Label label;
};

/// P(score_pos > score_neg) + 0.5 P(tie), counted exactly over all pairs.
/// Throws ArgumentError unless both classes are present and all scores are finite.
double auroc(std::span<const ScoredSample> samples);

/// Convenience overload: positives scored higher are "normal".
double auroc(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// Number of 4-connected components of {pixel > threshold} with at least
/// min_area pixels. Grayscale images only.
int count_components(const Image &img, double threshold = 0.5, int min_area = 3);

struct Histogram {
  std::vector<double> edges; // bins + 1 edges
  std::vector<long> counts;
};

/// Equal-width bins over [min, max]. Bins are left-closed, right-open; the
/// last bin is closed. A constant input puts everything in the first bin.
Histogram histogram(std::span<const double> values, int bins);

/// Exact counts per distinct integer value.
std::map<long, long> integer_histogram(std::span<const long> values);

double mean(std::span<const double> values);

} // namespace nda
