#pragma once

// Weakly paired dataset preparation: sliding crops, NCC filtering, homography
// alignment, manifests and the synthetic misaligned-pair generator.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ispw/image.hpp"

namespace ispw {

struct CropOrigin {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const CropOrigin&) const = default;
};

/// Origins at multiples of `stride` with the crop fully inside; per axis
/// floor((dim - crop) / stride) + 1 positions. Crop larger than the image
/// yields no origins and a warning event.
std::vector<CropOrigin> sliding_crops(std::size_t height, std::size_t width, std::size_t crop, std::size_t stride);

/// Zero-mean normalized cross-correlation over all channels jointly; 0 when
/// either image is constant.
double ncc(const RgbImage& a, const RgbImage& b);

/// NCC between the nearest-upsampled RAW visualization and the target.
double pair_ncc(const RawImage& raw, const RgbImage& target);

/// Correspondence (x1, y1) -> (x2, y2), pixel coordinates (x = column).
struct PointPair {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

/// Row-major 3x3 projective map.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  std::pair<double, double> apply(double x, double y) const;
  Homography inverse() const;
  Homography operator*(const Homography& o) const;
  static Homography translation(double dx, double dy);
};

/// Normalized DLT: Hartley-conditioned SVD null vector, scaled so m[8] = 1.
/// Fewer than four pairs is a parameter error; degenerate layouts raise DomainError.
Homography homography_dlt(const std::vector<PointPair>& pairs);

/// out(p) = img(H^-1 p), bilinear with replicate border; singular H raises DomainError.
RgbImage warp_homography(const RgbImage& img, const Homography& h);

/// JSON list of [x1, y1, x2, y2].
std::vector<PointPair> read_point_pairs(const std::string& path);

// ---- Manifests ----

struct ManifestEntry {
  std::string id;
  std::string split;  // train, val or test
  std::string capture;
  std::string raw;
  std::string target;
  /// RAW-resolution flows between the target and the RAW visualization.
  std::string flow_fwd;
  std::string flow_bwd;
  /// Full-resolution ground-truth alignment flow (synthetic data only).
  std::string gt_flow;
  std::optional<double> ncc;
};

struct Manifest {
  /// Directory that relative paths are resolved against.
  std::string root;
  std::vector<ManifestEntry> entries;
  std::size_t rejected = 0;

  std::string resolve(const std::string& rel) const;
  std::vector<const ManifestEntry*> split(const std::string& name) const;
};

std::string manifest_to_json(const Manifest& m);
/// Validates the schema and that splits are disjoint by capture id.
Manifest manifest_from_json(const std::string& text, const std::string& root);
void save_manifest(const std::string& path, const Manifest& m);
/// Loads and checks every referenced file exists.
Manifest load_manifest(const std::string& path);

/// Keeps entries whose NCC (computed from the files when absent) is >= threshold.
Manifest filter_pairs(const Manifest& m, double threshold = 0.5);

// ---- Synthetic data ----

struct SynthConfig {
  /// RAW resolution; targets are twice this size.
  std::size_t height = 40;
  std::size_t width = 40;
  std::size_t test_count = 0;
  double read_noise = 0.004;
  double shot_noise = 0.01;
  /// Full-resolution misalignment: translation (pixels), rotation (rad), zoom deviation.
  double max_shift = 3.0;
  double max_rotation = 0.02;
  double max_zoom = 0.02;
  bool misalign = true;
  bool identity_color = false;
  /// Occluders pasted into training targets only.
  int occluders = 4;
  /// Occluder side range as a fraction of the target side.
  double occluder_min = 0.15;
  double occluder_max = 0.3;
  /// Fill occluders with a flat color; otherwise only the estimated flow is corrupted there.
  bool occluder_paint = true;
  int blobs = 6;
  int gratings = 3;
  int edges = 2;
};

struct SynthSample {
  std::string id;
  std::string split;
  RawImage raw;
  /// Misaligned target at full resolution.
  RgbImage target;
  /// Target at full resolution without misalignment or occluders.
  RgbImage target_aligned;
  /// Estimated RAW-resolution flows; corrupted where an occluder hides the scene.
  FlowField flow_fwd;
  FlowField flow_bwd;
  /// Exact alignment flows: warp(target, gt_flow) lines up with the RAW.
  FlowField gt_flow;
  FlowField gt_flow_raw;
  /// RAW-resolution pixels whose aligned target is occluded.
  MaskImage occluded;
};

/// Sample `index` of the dataset with the given seed; the last cfg.test_count
/// indices of an n-sample set form the test split.
SynthSample synth_sample(std::size_t index, std::uint64_t seed, const SynthConfig& cfg, bool test);

/// Writes n samples plus manifest.json into `dir` and returns the manifest.
Manifest synth_dataset(std::size_t n, std::uint64_t seed, const SynthConfig& cfg, const std::string& dir);

}  // namespace ispw
