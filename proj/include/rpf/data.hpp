#pragma once

#include "rpf/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rpf {

enum class SplitLabel : std::uint8_t { Train, Val, Test };

std::string_view split_name(SplitLabel label);

/// Per-column affine map x -> (x - mean) / scale, fitted on the train split.
struct Standardization {
  Vector mean;
  Vector scale;
  bool applied = false;
};

/// Named N x D table of finite values with a per-row split label.
///
/// `color` holds the generative coordinate of synthetic manifolds (or the
/// label of blob data) and `labels` the generating component, when known.
struct Dataset {
  std::string name;
  Matrix values;
  std::vector<SplitLabel> split;
  Standardization standardization;
  std::vector<double> color;
  std::vector<int> labels;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t count(SplitLabel label) const;
  /// Rows carrying `label`, in dataset order.
  Matrix rows(SplitLabel label) const;
};

/// Wraps a matrix as a dataset with every row in the train split.
/// Throws DataError on non-finite entries or an empty matrix.
Dataset make_dataset(std::string name, Matrix values);

/// Reads a rectangular numeric CSV ('.' decimal, ',' separator, optional
/// double quotes around cells). Errors cite 1-based file line and column.
Dataset load_csv(const std::filesystem::path& path, bool has_header);

/// Writes values as CSV with 17 significant digits. `header` may be empty.
void save_csv(const Dataset& ds, const std::filesystem::path& path,
              const std::vector<std::string>& header = {});

/// Sidecar JSON with name, shape, color coordinate, labels and standardization.
void save_metadata(const Dataset& ds, const std::filesystem::path& path);

/// Fits mean and population standard deviation on the train rows and applies
/// the map to every row. Constant columns get scale 1. Composes with an
/// existing standardization so the recorded parameters always map raw data
/// to the current values.
Dataset standardize(const Dataset& ds);

/// Seeded shuffle, then contiguous train/val/test blocks sized by
/// largest-remainder rounding of fractions * N. Rows stay in place; only
/// labels change. Throws DataError if any split would be empty.
Dataset split_dataset(const Dataset& ds, const std::array<double, 3>& fractions, Seed seed);

/// Keeps at most `max_rows` rows labelled `label` (the first ones in dataset
/// order) and drops the rest of that label. Other rows are untouched.
Dataset cap_split(const Dataset& ds, SplitLabel label, std::size_t max_rows);

/// FNV-1a hash of the shape and standardization parameters, as 16 hex digits.
std::string fingerprint(const Dataset& ds);

// Synthetic generators. All are deterministic in the seed.

/// (t cos t, h, t sin t) + noise, t ~ U[1.5 pi, 4.5 pi], h ~ U[0, 21]; color = t.
Dataset gen_swiss_roll(std::size_t n, double noise, Seed seed);

/// (sin t, h, sign(t)(cos t - 1)) + noise, t ~ U[-1.5 pi, 1.5 pi], h ~ U[0, 2]; color = t.
Dataset gen_s_curve(std::size_t n, double noise, Seed seed);

/// Equal-probability center, isotropic Gaussian around it; labels and color = center index.
Dataset gen_blobs(std::size_t n, const std::vector<Vector>& centers, double stddev, Seed seed);

/// Standard normal in D dimensions.
Dataset gen_gaussian(std::size_t n, std::size_t dim, Seed seed);

/// Two-parameter twisted band embedded nonlinearly in 6-D, plus isotropic
/// noise; color = angular parameter. Offline stand-in for tabular benchmarks.
Dataset gen_manifold6(std::size_t n, double noise, Seed seed);

}  // namespace rpf
