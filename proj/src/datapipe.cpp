#include "ispw/datapipe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <set>

#include "ispw/binary_io.hpp"
#include "ispw/events.hpp"
#include "ispw/flowwarp.hpp"
#include "ispw/imagecore.hpp"
#include "ispw/rawproc.hpp"
#include "ispw/rng.hpp"

namespace ispw {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<CropOrigin> sliding_crops(std::size_t height, std::size_t width, std::size_t crop, std::size_t stride) {
  if (crop == 0 || stride == 0) throw ParameterError("sliding_crops: crop and stride must be >= 1");
  if (crop > height || crop > width) {
    events::warn("sliding_crops", "crop " + std::to_string(crop) + " exceeds image " + std::to_string(height) + "x" +
                                      std::to_string(width));
    return {};
  }
  std::vector<CropOrigin> out;
  for (std::size_t r = 0; r + crop <= height; r += stride) {
    for (std::size_t c = 0; c + crop <= width; c += stride) out.push_back({r, c});
  }
  return out;
}

double ncc(const RgbImage& a, const RgbImage& b) {
  require_same_dims(a, b, "ncc");
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.values()[i];
    mb += b.values()[i];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.values()[i] - ma, db = b.values()[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pair_ncc(const RawImage& raw, const RgbImage& target) {
  return ncc(upsample_nearest_2x(gamma_process(raw)), target);
}

// ---- Homographies ----

std::pair<double, double> Homography::apply(double x, double y) const {
  const double w = m[6] * x + m[7] * y + m[8];
  return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
}

namespace {

Eigen::Matrix3d to_eigen(const Homography& h) {
  Eigen::Matrix3d e;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) e(r, c) = h.m[std::size_t(r * 3 + c)];
  }
  return e;
}

Homography from_eigen(const Eigen::Matrix3d& e) {
  Homography h;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) h.m[std::size_t(r * 3 + c)] = e(r, c);
  }
  return h;
}

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d conditioner(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= double(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= double(pts.size());
  if (dist <= 0.0) throw DomainError("homography_dlt: all points coincide");
  const double s = std::sqrt(2.0) / dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

}  // namespace

Homography Homography::inverse() const {
  const Eigen::Matrix3d e = to_eigen(*this);
  const double det = e.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-12 * std::max(1.0, e.cwiseAbs().maxCoeff())) {
    throw DomainError("homography is singular");
  }
  Eigen::Matrix3d inv = e.inverse();
  if (inv(2, 2) != 0.0) inv /= inv(2, 2);
  return from_eigen(inv);
}

Homography Homography::operator*(const Homography& o) const { return from_eigen(to_eigen(*this) * to_eigen(o)); }

Homography Homography::translation(double dx, double dy) { return Homography{{1, 0, dx, 0, 1, dy, 0, 0, 1}}; }

Homography homography_dlt(const std::vector<PointPair>& pairs) {
  if (pairs.size() < 4) {
    throw ParameterError("homography_dlt: need at least 4 correspondences, got " + std::to_string(pairs.size()));
  }
  std::vector<Eigen::Vector2d> src, dst;
  for (const auto& p : pairs) {
    src.emplace_back(p.x1, p.y1);
    dst.emplace_back(p.x2, p.y2);
  }
  const Eigen::Matrix3d ts = conditioner(src), td = conditioner(dst);
  const std::size_t n = pairs.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(Eigen::Index(std::max<std::size_t>(2 * n, 9)), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x(), src[i].y(), 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x(), dst[i].y(), 1.0);
    const Eigen::Index r = Eigen::Index(2 * i);
    a.row(r) << 0, 0, 0, -d.z() * s.x(), -d.z() * s.y(), -d.z() * s.z(), d.y() * s.x(), d.y() * s.y(), d.y() * s.z();
    a.row(r + 1) << d.z() * s.x(), d.z() * s.y(), d.z() * s.z(), 0, 0, 0, -d.x() * s.x(), -d.x() * s.y(), -d.x() * s.z();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) <= 1e-10 * sv(0)) {
    throw DomainError("homography_dlt: correspondences are degenerate (rank-deficient system)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d out = td.inverse() * hn * ts;
  if (std::abs(out(2, 2)) > 1e-15) out /= out(2, 2);
  return from_eigen(out);
}

RgbImage warp_homography(const RgbImage& img, const Homography& h) {
  const Homography inv = h.inverse();
  const std::size_t rows = img.height(), cols = img.width();
  RgbImage out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto [x, y] = inv.apply(double(c), double(r));
      for (std::size_t ch = 0; ch < 3; ++ch) out.at(ch, r, c) = sample_bilinear(img.plane(ch), rows, cols, x, y);
    }
  }
  return out;
}

std::vector<PointPair> read_point_pairs(const std::string& path) {
  const auto bytes = binio::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError("point pairs " + path + ": invalid JSON: " + e.what());
  }
  if (!j.is_array()) throw FormatError("point pairs " + path + ": expected a list of [x1, y1, x2, y2]");
  std::vector<PointPair> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_array() || e.size() != 4 || !std::all_of(e.begin(), e.end(), [](const json& v) { return v.is_number(); })) {
      throw FormatError("point pairs " + path + ": entry " + std::to_string(i) + " is not [x1, y1, x2, y2]");
    }
    out.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>(), e[3].get<double>()});
  }
  return out;
}

// ---- Manifests ----

std::string Manifest::resolve(const std::string& rel) const {
  if (rel.empty()) return rel;
  const fs::path p(rel);
  return p.is_absolute() || root.empty() ? rel : (fs::path(root) / p).string();
}

std::vector<const ManifestEntry*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  return out;
}

std::string manifest_to_json(const Manifest& m) {
  json j;
  j["format"] = "ispw-manifest";
  j["version"] = 1;
  j["rejected"] = m.rejected;
  j["samples"] = json::array();
  for (const auto& e : m.entries) {
    json s{{"id", e.id}, {"split", e.split}, {"capture", e.capture}, {"raw", e.raw}, {"target", e.target}};
    if (!e.flow_fwd.empty()) s["flow_fwd"] = e.flow_fwd;
    if (!e.flow_bwd.empty()) s["flow_bwd"] = e.flow_bwd;
    if (!e.gt_flow.empty()) s["gt_flow"] = e.gt_flow;
    if (e.ncc) s["ncc"] = *e.ncc;
    j["samples"].push_back(s);
  }
  return j.dump(2);
}

Manifest manifest_from_json(const std::string& text, const std::string& root) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
  }
  Manifest m;
  m.root = root;
  try {
    if (j.value("format", "") != "ispw-manifest") throw FormatError("manifest: missing or wrong 'format' tag");
    if (j.value("version", 0) != 1) throw FormatError("manifest: unsupported version");
    m.rejected = j.value("rejected", std::size_t{0});
    static const std::set<std::string> known{"id", "split", "capture", "raw", "target", "flow_fwd", "flow_bwd", "gt_flow", "ncc"};
    for (const auto& s : j.at("samples")) {
      for (const auto& [k, _] : s.items()) {
        if (!known.count(k)) throw FormatError("manifest: unknown sample field '" + k + "'");
      }
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.split = s.at("split").get<std::string>();
      if (e.split != "train" && e.split != "val" && e.split != "test") {
        throw FormatError("manifest: sample " + e.id + " has split '" + e.split + "' (expected train, val or test)");
      }
      e.capture = s.value("capture", e.id);
      e.raw = s.at("raw").get<std::string>();
      e.target = s.at("target").get<std::string>();
      e.flow_fwd = s.value("flow_fwd", "");
      e.flow_bwd = s.value("flow_bwd", "");
      e.gt_flow = s.value("gt_flow", "");
      if (s.contains("ncc")) e.ncc = s.at("ncc").get<double>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  std::map<std::string, std::string> capture_split;
  for (const auto& e : m.entries) {
    auto [it, inserted] = capture_split.emplace(e.capture, e.split);
    if (!inserted && it->second != e.split) {
      throw FormatError("manifest: capture '" + e.capture + "' appears in both " + it->second + " and " + e.split);
    }
  }
  return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
  const std::string text = manifest_to_json(m) + "\n";
  binio::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Manifest load_manifest(const std::string& path) {
  const auto bytes = binio::read_file(path);
  Manifest m = manifest_from_json(std::string(bytes.begin(), bytes.end()), fs::path(path).parent_path().string());
  for (const auto& e : m.entries) {
    for (const std::string* f : {&e.raw, &e.target, &e.flow_fwd, &e.flow_bwd, &e.gt_flow}) {
      if (!f->empty() && !fs::exists(m.resolve(*f))) {
        throw IoError("manifest: sample " + e.id + " references missing file " + m.resolve(*f));
      }
    }
  }
  return m;
}

Manifest filter_pairs(const Manifest& m, double threshold) {
  Manifest out;
  out.root = m.root;
  out.rejected = m.rejected;
  for (const auto& e : m.entries) {
    ManifestEntry kept = e;
    if (!kept.ncc) kept.ncc = pair_ncc(read_raw4(m.resolve(e.raw)), read_ppm(m.resolve(e.target)));
    if (*kept.ncc >= threshold) {
      out.entries.push_back(std::move(kept));
    } else {
      ++out.rejected;
    }
  }
  events::emit({{"event", "filter_pairs"}, {"kept", out.entries.size()}, {"rejected", out.rejected - m.rejected}});
  return out;
}

// ---- Synthetic data ----

namespace {

struct Scene {
  double base[3];
  double grad[3][2];
  struct Blob {
    double cx, cy, inv2s2, amp[3];
  };
  struct Grating {
    double fx, fy, phase, amp[3];
  };
  struct Edge {
    double nx, ny, offset, amp[3];
  };
  std::vector<Blob> blobs;
  std::vector<Grating> gratings;
  std::vector<Edge> edges;
  double w, h;

  std::array<double, 3> eval(double u, double v) const {
    std::array<double, 3> out;
    for (std::size_t c = 0; c < 3; ++c) out[c] = base[c] + grad[c][0] * (u / w - 0.5) + grad[c][1] * (v / h - 0.5);
    for (const auto& b : blobs) {
      const double e = std::exp(-((u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy)) * b.inv2s2);
      for (std::size_t c = 0; c < 3; ++c) out[c] += b.amp[c] * e;
    }
    for (const auto& g : gratings) {
      const double s = std::sin(g.fx * u + g.fy * v + g.phase);
      for (std::size_t c = 0; c < 3; ++c) out[c] += g.amp[c] * s;
    }
    for (const auto& e : edges) {
      const double t = 1.0 / (1.0 + std::exp(-(e.nx * u + e.ny * v - e.offset) / 0.35));
      for (std::size_t c = 0; c < 3; ++c) out[c] += e.amp[c] * t;
    }
    for (double& x : out) x = std::clamp(x, 0.02, 0.98);
    return out;
  }
};

Scene random_scene(SplitMix64& rng, const SynthConfig& cfg, double w, double h) {
  Scene s;
  s.w = w;
  s.h = h;
  for (std::size_t c = 0; c < 3; ++c) {
    s.base[c] = rng.uniform(0.3, 0.6);
    s.grad[c][0] = rng.uniform(-0.2, 0.2);
    s.grad[c][1] = rng.uniform(-0.2, 0.2);
  }
  const double size = std::min(w, h);
  for (int i = 0; i < cfg.blobs; ++i) {
    Scene::Blob b;
    b.cx = rng.uniform(0.0, w);
    b.cy = rng.uniform(0.0, h);
    const double sigma = rng.uniform(0.15, 0.35) * size;
    b.inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (double& a : b.amp) a = rng.uniform(-0.2, 0.2);
    s.blobs.push_back(b);
  }
  for (int i = 0; i < cfg.gratings; ++i) {
    Scene::Grating g;
    const double f = rng.uniform(0.2, 0.7), theta = rng.uniform(0.0, 2.0 * M_PI);
    g.fx = f * std::cos(theta);
    g.fy = f * std::sin(theta);
    g.phase = rng.uniform(0.0, 2.0 * M_PI);
    for (double& a : g.amp) a = rng.uniform(0.02, 0.07);
    s.gratings.push_back(g);
  }
  for (int i = 0; i < cfg.edges; ++i) {
    Scene::Edge e;
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    e.nx = std::cos(theta);
    e.ny = std::sin(theta);
    e.offset = e.nx * rng.uniform(0.2 * w, 0.8 * w) + e.ny * rng.uniform(0.2 * h, 0.8 * h);
    for (double& a : e.amp) a = rng.uniform(-0.15, 0.15);
    s.edges.push_back(e);
  }
  return s;
}

// DSLR rendering: per-channel tone curve after a mild cross-channel mix.
struct ColorTransform {
  double mix[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  double gamma[3] = {1, 1, 1};
  double gain[3] = {1, 1, 1};

  std::array<double, 3> operator()(const std::array<double, 3>& s) const {
    std::array<double, 3> out;
    for (std::size_t j = 0; j < 3; ++j) {
      const double m = std::max(0.0, mix[j * 3] * s[0] + mix[j * 3 + 1] * s[1] + mix[j * 3 + 2] * s[2]);
      out[j] = std::clamp(gain[j] * std::pow(m, gamma[j]), 0.0, 1.0);
    }
    return out;
  }
};

ColorTransform random_color(SplitMix64& rng) {
  ColorTransform t;
  for (std::size_t j = 0; j < 3; ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      t.mix[j * 3 + k] = j == k ? 1.0 : rng.uniform(-0.05, 0.25);
      row += t.mix[j * 3 + k];
    }
    for (std::size_t k = 0; k < 3; ++k) t.mix[j * 3 + k] /= row;
    t.gamma[j] = rng.uniform(0.45, 0.8);
    t.gain[j] = rng.uniform(0.9, 1.05);
  }
  return t;
}

// g(p) = c + s R(theta) (p - c) + t on full-resolution pixel coordinates.
struct Similarity {
  double cx = 0, cy = 0, s = 1, theta = 0, tx = 0, ty = 0;

  std::pair<double, double> fwd(double x, double y) const {
    const double dx = x - cx, dy = y - cy, co = std::cos(theta), si = std::sin(theta);
    return {cx + s * (co * dx - si * dy) + tx, cy + s * (si * dx + co * dy) + ty};
  }
  std::pair<double, double> inv(double x, double y) const {
    const double dx = (x - cx - tx) / s, dy = (y - cy - ty) / s, co = std::cos(theta), si = std::sin(theta);
    return {cx + co * dx + si * dy, cy - si * dx + co * dy};
  }
};

constexpr double kRawGains[4] = {1.0 / 2.5, 1.0, 1.0, 1.0 / 1.4};
// Full-resolution offsets (column, row) of the R, Gr, Gb, B sites in a 2x2 cell.
constexpr int kSiteDx[4] = {0, 1, 0, 1};
constexpr int kSiteDy[4] = {0, 0, 1, 1};
constexpr std::size_t kSiteChannel[4] = {0, 1, 1, 2};

}  // namespace

SynthSample synth_sample(std::size_t index, std::uint64_t seed, const SynthConfig& cfg, bool test) {
  if (cfg.height == 0 || cfg.width == 0) throw ParameterError("synth: height and width must be >= 1");
  SplitMix64 rng(derive_seed(seed, index));
  const std::size_t H = cfg.height, W = cfg.width, FH = 2 * H, FW = 2 * W;
  SynthSample out;
  char id[32];
  std::snprintf(id, sizeof id, "s%04zu", index);
  out.id = id;
  out.split = test ? "test" : "train";

  const Scene scene = random_scene(rng, cfg, double(FW), double(FH));
  const ColorTransform color = cfg.identity_color ? ColorTransform{} : random_color(rng);
  Similarity g;
  g.cx = (double(FW) - 1.0) / 2.0;
  g.cy = (double(FH) - 1.0) / 2.0;
  if (cfg.misalign) {
    g.tx = rng.uniform(-cfg.max_shift, cfg.max_shift);
    g.ty = rng.uniform(-cfg.max_shift, cfg.max_shift);
    g.theta = rng.uniform(-cfg.max_rotation, cfg.max_rotation);
    g.s = 1.0 + rng.uniform(-cfg.max_zoom, cfg.max_zoom);
  }

  out.raw = RawImage(H, W);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      for (std::size_t p = 0; p < 4; ++p) {
        const auto s = scene.eval(double(2 * c + kSiteDx[p]), double(2 * r + kSiteDy[p]));
        const double lin = kRawGains[p] * std::pow(s[kSiteChannel[p]], 2.2);
        const double noise = cfg.read_noise * rng.normal() + cfg.shot_noise * std::sqrt(lin) * rng.normal();
        out.raw.at(p, r, c) = float(std::max(0.0, lin + noise));
      }
    }
  }

  out.target = RgbImage(FH, FW);
  out.target_aligned = RgbImage(FH, FW);
  out.gt_flow = FlowField(FH, FW);
  for (std::size_t r = 0; r < FH; ++r) {
    for (std::size_t c = 0; c < FW; ++c) {
      const auto [gx, gy] = g.fwd(double(c), double(r));
      const auto y = color(scene.eval(gx, gy));
      const auto ya = color(scene.eval(double(c), double(r)));
      const auto [ix, iy] = g.inv(double(c), double(r));
      for (std::size_t j = 0; j < 3; ++j) {
        out.target.at(j, r, c) = float(y[j]);
        out.target_aligned.at(j, r, c) = float(ya[j]);
      }
      out.gt_flow.at(0, r, c) = float(ix - double(c));
      out.gt_flow.at(1, r, c) = float(iy - double(r));
    }
  }

  out.gt_flow_raw = FlowField(H, W);
  out.flow_bwd = FlowField(H, W);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const double px = 2.0 * double(c) + 0.5, py = 2.0 * double(r) + 0.5;
      const auto [ix, iy] = g.inv(px, py);
      const auto [fx, fy] = g.fwd(px, py);
      out.gt_flow_raw.at(0, r, c) = float((ix - px) / 2.0);
      out.gt_flow_raw.at(1, r, c) = float((iy - py) / 2.0);
      out.flow_bwd.at(0, r, c) = float((fx - px) / 2.0);
      out.flow_bwd.at(1, r, c) = float((fy - py) / 2.0);
    }
  }
  out.flow_fwd = out.gt_flow_raw;
  out.occluded = MaskImage(H, W);

  if (!test) {
    for (int k = 0; k < cfg.occluders; ++k) {
      const double ow = rng.uniform(cfg.occluder_min, cfg.occluder_max) * double(FW);
      const double oh = rng.uniform(cfg.occluder_min, cfg.occluder_max) * double(FH);
      const double ox = rng.uniform(0.0, double(FW) - ow), oy = rng.uniform(0.0, double(FH) - oh);
      double paint[3];
      for (double& v : paint) v = rng.uniform(0.05, 0.95);
      const double mag = rng.uniform(2.0, 4.0), ang = rng.uniform(0.0, 2.0 * M_PI);
      for (std::size_t r = 0; r < FH; ++r) {
        for (std::size_t c = 0; c < FW; ++c) {
          if (cfg.occluder_paint && double(c) >= ox && double(c) < ox + ow && double(r) >= oy && double(r) < oy + oh) {
            for (std::size_t j = 0; j < 3; ++j) out.target.at(j, r, c) = float(paint[j]);
          }
        }
      }
      const double pad = 1.5;
      for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
          const auto [tx, ty] = g.inv(2.0 * double(c) + 0.5, 2.0 * double(r) + 0.5);
          if (tx >= ox - pad && tx < ox + ow + pad && ty >= oy - pad && ty < oy + oh + pad) {
            out.occluded.at(0, r, c) = 1.0f;
            out.flow_fwd.at(0, r, c) = out.gt_flow_raw.at(0, r, c) + float(mag * std::cos(ang));
            out.flow_fwd.at(1, r, c) = out.gt_flow_raw.at(1, r, c) + float(mag * std::sin(ang));
          }
        }
      }
    }
  }
  return out;
}

Manifest synth_dataset(std::size_t n, std::uint64_t seed, const SynthConfig& cfg, const std::string& dir) {
  if (n == 0) throw ParameterError("synth: sample count must be >= 1");
  if (cfg.test_count > n) throw ParameterError("synth: test_count exceeds the sample count");
  fs::create_directories(dir);
  Manifest m;
  m.root = dir;
  for (std::size_t i = 0; i < n; ++i) {
    const bool test = i >= n - cfg.test_count;
    const SynthSample s = synth_sample(i, seed, cfg, test);
    ManifestEntry e;
    e.id = s.id;
    e.split = s.split;
    e.capture = s.id;
    e.raw = s.id + "_raw.raw4";
    e.target = s.id + "_target.ppm";
    e.flow_fwd = s.id + "_fwd.flo";
    e.flow_bwd = s.id + "_bwd.flo";
    e.gt_flow = s.id + "_gt.flo";
    write_raw4(m.resolve(e.raw), s.raw);
    write_ppm(m.resolve(e.target), s.target);
    write_flo(m.resolve(e.flow_fwd), s.flow_fwd);
    write_flo(m.resolve(e.flow_bwd), s.flow_bwd);
    write_flo(m.resolve(e.gt_flow), s.gt_flow);
    e.ncc = pair_ncc(s.raw, s.target);
    m.entries.push_back(std::move(e));
  }
  save_manifest((fs::path(dir) / "manifest.json").string(), m);
  return m;
}

}  // namespace ispw
