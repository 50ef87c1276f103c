#include "ispw/colormap.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <json.hpp>

#include "ispw/binary_io.hpp"
#include "ispw/imagecore.hpp"

namespace ispw {

namespace {

using json = nlohmann::json;

struct VariantInfo {
  ColorMapVariant v;
  std::string_view name;
  std::string_view ablation;
};

constexpr VariantInfo kVariants[] = {
    {ColorMapVariant::Linear3x3, "linear3x3", "LinearMap"},
    {ColorMapVariant::ConstVal, "const_val", "ConstValMap"},
    {ColorMapVariant::AffineIndep, "affine_indep", "AffineMapIndep"},
    {ColorMapVariant::AffineDep, "affine_dep", "AffineMapDep"},
    {ColorMapVariant::ColorBlur, "color_blur", "ColorBlur"},
};

void require_fitted(const ColorMapModel& m) {
  if (!m.fitted) throw StateError("color map model has not been fitted");
  if (m.bins < 1) throw StateError("color map model has no bins");
}

// Soft assignment over bins for one scalar intensity; also returns
// d(logit_b)/dx when `dlogit` is non-null.
void bin_weights(double x, const std::vector<double>& k, double temperature, double* w, double* dlogit) {
  const std::size_t nb = k.size();
  double mx = -INFINITY;
  for (std::size_t b = 0; b < nb; ++b) {
    const double d = x - k[b];
    w[b] = -d * d / temperature;
    if (dlogit) dlogit[b] = -2.0 * d / temperature;
    mx = std::max(mx, w[b]);
  }
  double z = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    w[b] = std::exp(w[b] - mx);
    z += w[b];
  }
  for (std::size_t b = 0; b < nb; ++b) w[b] /= z;
}

// Per-bin affine value L_b for output channel j at pixel (x1, x2, x3) and
// its partial derivatives with respect to the three inputs.
double bin_value(const ColorMapModel& m, std::size_t j, std::size_t b, const double* x, double* dx) {
  const std::size_t nb = std::size_t(m.bins);
  switch (m.variant) {
    case ColorMapVariant::AffineDep: {
      const double* v = m.params.data() + (j * nb + b) * 4;
      if (dx) {
        dx[0] = v[0];
        dx[1] = v[1];
        dx[2] = v[2];
      }
      return v[0] * x[0] + v[1] * x[1] + v[2] * x[2] + v[3];
    }
    case ColorMapVariant::AffineIndep: {
      const double* v = m.params.data() + (j * nb + b) * 2;
      if (dx) {
        dx[0] = dx[1] = dx[2] = 0.0;
        dx[j] = v[0];
      }
      return v[0] * x[j] + v[1];
    }
    case ColorMapVariant::ConstVal:
      if (dx) dx[0] = dx[1] = dx[2] = 0.0;
      return m.params[j * nb + b];
    default:
      throw ContractError("bin_value: variant has no per-bin parameters");
  }
}

template <class In, class Out>
void apply_planar(const In* x, std::size_t n, const ColorMapModel& m, Out* out) {
  if (m.variant == ColorMapVariant::ColorBlur) {
    for (std::size_t i = 0; i < 3 * n; ++i) out[i] = static_cast<Out>(m.params[i]);
    return;
  }
  if (m.variant == ColorMapVariant::Linear3x3) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p[3] = {double(x[i]), double(x[n + i]), double(x[2 * n + i])};
      for (std::size_t j = 0; j < 3; ++j) {
        out[j * n + i] = static_cast<Out>(m.params[j * 3] * p[0] + m.params[j * 3 + 1] * p[1] + m.params[j * 3 + 2] * p[2]);
      }
    }
    return;
  }
  const std::size_t nb = std::size_t(m.bins);
  std::vector<double> w(nb);
  for (std::size_t i = 0; i < n; ++i) {
    const double p[3] = {double(x[i]), double(x[n + i]), double(x[2 * n + i])};
    for (std::size_t j = 0; j < 3; ++j) {
      bin_weights(p[j], m.centroids[j], m.temperature, w.data(), nullptr);
      double acc = 0.0;
      for (std::size_t b = 0; b < nb; ++b) acc += w[b] * bin_value(m, j, b, p, nullptr);
      out[j * n + i] = static_cast<Out>(acc);
    }
  }
}

template <class In, class G, class Out>
void vjp_planar(const In* x, std::size_t n, const ColorMapModel& m, const G* g, Out* gx) {
  if (m.variant == ColorMapVariant::ColorBlur) return;
  if (m.variant == ColorMapVariant::Linear3x3) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 3; ++j) acc += m.params[j * 3 + k] * double(g[j * n + i]);
        gx[k * n + i] += static_cast<Out>(acc);
      }
    }
    return;
  }
  const std::size_t nb = std::size_t(m.bins);
  std::vector<double> w(nb), dl(nb);
  for (std::size_t i = 0; i < n; ++i) {
    const double p[3] = {double(x[i]), double(x[n + i]), double(x[2 * n + i])};
    double acc[3] = {0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < 3; ++j) {
      const double gj = double(g[j * n + i]);
      if (gj == 0.0) continue;
      bin_weights(p[j], m.centroids[j], m.temperature, w.data(), dl.data());
      double dbar = 0.0;
      for (std::size_t b = 0; b < nb; ++b) dbar += w[b] * dl[b];
      double through_weights = 0.0;
      double dx[3];
      for (std::size_t b = 0; b < nb; ++b) {
        const double val = bin_value(m, j, b, p, dx);
        through_weights += w[b] * (dl[b] - dbar) * val;
        for (std::size_t k = 0; k < 3; ++k) acc[k] += gj * w[b] * dx[k];
      }
      acc[j] += gj * through_weights;
    }
    for (std::size_t k = 0; k < 3; ++k) gx[k * n + i] += static_cast<Out>(acc[k]);
  }
}

// Solve (A + 0) v = r for a small SPD system, falling back to an SVD
// pseudo-inverse when the factorization is unreliable.
template <int D>
Eigen::Matrix<double, D, 1> solve_spd(const Eigen::Matrix<double, D, D>& a, const Eigen::Matrix<double, D, 1>& r) {
  Eigen::LDLT<Eigen::Matrix<double, D, D>> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-13) {
    Eigen::Matrix<double, D, 1> v = ldlt.solve(r);
    if (v.allFinite()) return v;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, D, D>> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(1e-12);
  return svd.solve(r);
}

std::vector<std::uint8_t> pack_f32(const std::vector<double>& v) {
  std::vector<std::uint8_t> out;
  out.reserve(4 * v.size());
  for (double d : v) binio::put_f32(out, static_cast<float>(d));
  return out;
}

std::vector<double> unpack_f32(const std::vector<std::uint8_t>& bytes, const char* what) {
  if (bytes.size() % 4 != 0) throw FormatError(std::string("colormap: ") + what + " payload not a multiple of 4 bytes");
  binio::Reader rd(bytes, "colormap");
  std::vector<double> out(bytes.size() / 4);
  for (double& d : out) d = rd.f32();
  return out;
}

}  // namespace

std::string_view variant_name(ColorMapVariant v) {
  for (const auto& info : kVariants) {
    if (info.v == v) return info.name;
  }
  return "unknown";
}

ColorMapVariant parse_variant(std::string_view name) {
  for (const auto& info : kVariants) {
    if (info.name == name || info.ablation == name) return info.v;
  }
  throw ParameterError("unknown color map variant '" + std::string(name) + "'");
}

std::size_t ColorMapModel::params_per_bin() const {
  switch (variant) {
    case ColorMapVariant::AffineDep: return 4;
    case ColorMapVariant::AffineIndep: return 2;
    case ColorMapVariant::ConstVal: return 1;
    default: return 0;
  }
}

std::array<std::vector<double>, 3> make_bins(const RgbImage& xt, int bins) {
  if (bins < 1) throw ParameterError("make_bins: bin count must be >= 1, got " + std::to_string(bins));
  std::array<std::vector<double>, 3> out;
  for (std::size_t j = 0; j < 3; ++j) {
    auto plane = xt.plane(j);
    const auto [lo_it, hi_it] = std::minmax_element(plane.begin(), plane.end());
    const double lo = *lo_it, hi = *hi_it;
    const double step = (hi - lo) / bins;
    out[j].resize(std::size_t(bins));
    for (int b = 0; b < bins; ++b) out[j][std::size_t(b)] = hi == lo ? lo : lo + (b + 0.5) * step;
  }
  return out;
}

BinWeights soft_weights(const RgbImage& xt, const ColorMapModel& model, WeightAxis axis) {
  if (model.bins < 1) throw StateError("soft_weights: model has no bins");
  BinWeights bw;
  bw.axis = axis;
  bw.pixels = xt.pixels();
  bw.bins = std::size_t(model.bins);
  const std::size_t n = bw.pixels, nb = bw.bins;
  for (std::size_t j = 0; j < 3; ++j) {
    auto plane = xt.plane(j);
    auto& w = bw.w[j];
    w.resize(n * nb);
    if (axis == WeightAxis::OverBins) {
      for (std::size_t i = 0; i < n; ++i) bin_weights(plane[i], model.centroids[j], model.temperature, &w[i * nb], nullptr);
      continue;
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const double k = model.centroids[j][b];
      double mx = -INFINITY;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = plane[i] - k;
        w[i * nb + b] = -d * d / model.temperature;
        mx = std::max(mx, w[i * nb + b]);
      }
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        w[i * nb + b] = std::exp(w[i * nb + b] - mx);
        z += w[i * nb + b];
      }
      for (std::size_t i = 0; i < n; ++i) w[i * nb + b] /= z;
    }
  }
  return bw;
}

ColorMapModel fit(const RgbImage& xt, const RgbImage& c, const ColorMapOptions& opt, const MaskImage* mask) {
  require_same_dims(xt, c, "colormap fit");
  if (mask != nullptr) require_same_dims(xt, *mask, "colormap fit mask");
  if (xt.pixels() < 4) throw DimensionError("colormap fit: need at least 4 pixels, got " + std::to_string(xt.pixels()));
  if (!all_finite(xt) || !all_finite(c)) throw DomainError("colormap fit: non-finite input");
  if (opt.bins < 1) throw ParameterError("colormap fit: bins must be >= 1");
  ColorMapModel m;
  m.variant = opt.variant;
  m.bins = opt.bins;
  m.temperature = opt.temperature > 0.0 ? opt.temperature : 1.0 / (double(opt.bins) * double(opt.bins));
  m.height = xt.height();
  m.width = xt.width();
  m.blur_size = opt.blur_size;
  m.blur_sigma = opt.blur_sigma;
  m.centroids = make_bins(xt, opt.bins);
  const std::size_t n = xt.pixels(), nb = std::size_t(opt.bins);
  auto pw = [&](std::size_t i) { return mask == nullptr ? 1.0 : double(mask->values()[i]); };

  switch (m.variant) {
    case ColorMapVariant::ColorBlur: {
      RgbImage blurred = gaussian_blur(c, opt.blur_size, opt.blur_sigma);
      if (mask != nullptr) {
        // Normalized convolution: masked pixels are filled from valid neighbors.
        RgbImage mc = c;
        for (std::size_t j = 0; j < 3; ++j) {
          for (std::size_t i = 0; i < n; ++i) mc.plane(j)[i] *= mask->values()[i];
        }
        const RgbImage num = gaussian_blur(mc, opt.blur_size, opt.blur_sigma);
        const MaskImage den = gaussian_blur(*mask, opt.blur_size, opt.blur_sigma);
        for (std::size_t j = 0; j < 3; ++j) {
          for (std::size_t i = 0; i < n; ++i) {
            if (den.values()[i] > 1e-3f) blurred.plane(j)[i] = num.plane(j)[i] / den.values()[i];
          }
        }
      }
      m.params.assign(blurred.values().begin(), blurred.values().end());
      break;
    }
    case ColorMapVariant::Linear3x3: {
      Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
      Eigen::Matrix3d xtc = Eigen::Matrix3d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d p(xt.plane(0)[i], xt.plane(1)[i], xt.plane(2)[i]);
        const Eigen::Vector3d q(c.plane(0)[i], c.plane(1)[i], c.plane(2)[i]);
        xtx += pw(i) * p * p.transpose();
        xtc += pw(i) * p * q.transpose();
      }
      m.params.resize(9);
      for (int j = 0; j < 3; ++j) {
        const Eigen::Vector3d row = solve_spd<3>(xtx, xtc.col(j));
        for (int k = 0; k < 3; ++k) m.params[std::size_t(j * 3 + k)] = row[k];
      }
      break;
    }
    default: {
      const BinWeights bw = soft_weights(xt, m, WeightAxis::OverPixels);
      m.params.assign(3 * nb * m.params_per_bin(), 0.0);
      for (std::size_t j = 0; j < 3; ++j) {
        auto cj = c.plane(j);
        for (std::size_t b = 0; b < nb; ++b) {
          if (m.variant == ColorMapVariant::ConstVal) {
            double v = 0.0, mass = 0.0, all = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              v += bw.at(j, i, b) * pw(i) * cj[i];
              mass += bw.at(j, i, b) * pw(i);
              all += bw.at(j, i, b) * cj[i];
            }
            m.params[j * nb + b] = mask == nullptr ? v : (mass > 1e-12 ? v / mass : all);
          } else if (m.variant == ColorMapVariant::AffineIndep) {
            Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
            Eigen::Vector2d r = Eigen::Vector2d::Zero();
            double wsum = 0.0;
            auto xj = xt.plane(j);
            for (std::size_t i = 0; i < n; ++i) {
              const double w = bw.at(j, i, b) * pw(i);
              const Eigen::Vector2d row(xj[i], 1.0);
              a += w * row * row.transpose();
              r += w * row * double(cj[i]);
              wsum += w;
            }
            a.diagonal().array() += 1e-6 * (wsum + 1.0);
            const Eigen::Vector2d v = solve_spd<2>(a, r);
            m.params[(j * nb + b) * 2] = v[0];
            m.params[(j * nb + b) * 2 + 1] = v[1];
          } else {
            Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
            Eigen::Vector4d r = Eigen::Vector4d::Zero();
            double wsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              const double w = bw.at(j, i, b) * pw(i);
              const Eigen::Vector4d row(xt.plane(0)[i], xt.plane(1)[i], xt.plane(2)[i], 1.0);
              a.noalias() += w * row * row.transpose();
              r += w * row * double(cj[i]);
              wsum += w;
            }
            a.diagonal().array() += 1e-6 * (wsum + 1.0);
            const Eigen::Vector4d v = solve_spd<4>(a, r);
            for (int k = 0; k < 4; ++k) m.params[(j * nb + b) * 4 + std::size_t(k)] = v[k];
          }
        }
      }
      break;
    }
  }
  for (double v : m.params) {
    if (!std::isfinite(v)) throw DomainError("colormap fit produced non-finite parameters");
  }
  m.fitted = true;
  return m;
}

RgbImage apply(const RgbImage& xt, const ColorMapModel& model) {
  require_fitted(model);
  if (model.variant == ColorMapVariant::ColorBlur && !xt.same_dims(model.height, model.width)) {
    throw DimensionError("colormap apply: ColorBlur model fitted at " + std::to_string(model.height) + "x" +
                         std::to_string(model.width) + ", input is " + std::to_string(xt.height()) + "x" +
                         std::to_string(xt.width()));
  }
  RgbImage out(xt.height(), xt.width());
  apply_planar(xt.values().data(), xt.pixels(), model, out.values().data());
  return out;
}

RgbImage apply_vjp(const RgbImage& xt, const ColorMapModel& model, const RgbImage& g) {
  require_fitted(model);
  require_same_dims(xt, g, "colormap apply_vjp");
  std::vector<double> acc(3 * xt.pixels(), 0.0);
  vjp_planar(xt.values().data(), xt.pixels(), model, g.values().data(), acc.data());
  return RgbImage(xt.height(), xt.width(), std::vector<float>(acc.begin(), acc.end()));
}

template <class T>
grad::Var<T> colormap_apply(grad::Var<T> xt, const ColorMapModel& model) {
  require_fitted(model);
  const grad::Shape s = xt.shape();
  if (s.size() != 3 || s[0] != 3) throw DimensionError("colormap_apply: expected [3,H,W], got " + grad::shape_str(s));
  if (model.variant == ColorMapVariant::ColorBlur && (s[1] != model.height || s[2] != model.width)) {
    throw DimensionError("colormap_apply: ColorBlur model dims do not match " + grad::shape_str(s));
  }
  const std::size_t n = s[1] * s[2];
  grad::Tensor<T> out(s);
  apply_planar(xt.value().data(), n, model, out.data());
  const int ix = xt.id;
  return xt.tape->record(std::move(out), {ix}, [ix, n, model](grad::Tape<T>& t, int self) {
    vjp_planar(t.value(ix).data(), n, model, t.grad_ref(self).data(), t.grad_ref(ix).data());
  }, "colormap_apply");
}

template grad::Var<float> colormap_apply(grad::Var<float>, const ColorMapModel&);
template grad::Var<double> colormap_apply(grad::Var<double>, const ColorMapModel&);

double fit_residual_l1(const RgbImage& xt, const RgbImage& c, const ColorMapModel& model) {
  require_same_dims(xt, c, "fit_residual_l1");
  std::vector<double> pred(3 * xt.pixels());
  apply_planar(xt.values().data(), xt.pixels(), model, pred.data());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - double(c.values()[i]));
  return s / double(pred.size());
}

std::string model_to_json(const ColorMapModel& model) {
  require_fitted(model);
  json j;
  j["format"] = "ispw-colormap";
  j["version"] = 1;
  j["variant"] = std::string(variant_name(model.variant));
  j["bins"] = model.bins;
  j["temperature"] = model.temperature;
  j["height"] = model.height;
  j["width"] = model.width;
  j["blur_size"] = model.blur_size;
  j["blur_sigma"] = model.blur_sigma;
  const bool inline_values = model.bins <= 16 && model.variant != ColorMapVariant::ColorBlur;
  if (inline_values) {
    j["centroids"] = model.centroids;
    j["params"] = model.params;
  } else {
    std::vector<double> flat;
    for (const auto& c : model.centroids) flat.insert(flat.end(), c.begin(), c.end());
    j["centroids_b64"] = base64::encode(pack_f32(flat));
    j["params_b64"] = base64::encode(pack_f32(model.params));
  }
  return j.dump(2);
}

ColorMapModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("colormap: invalid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "ispw-colormap") throw FormatError("colormap: missing or wrong 'format' tag");
    ColorMapModel m;
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.bins = j.at("bins").get<int>();
    m.temperature = j.at("temperature").get<double>();
    m.height = j.at("height").get<std::size_t>();
    m.width = j.at("width").get<std::size_t>();
    m.blur_size = j.value("blur_size", 9);
    m.blur_sigma = j.value("blur_sigma", 2.0);
    if (m.bins < 1 || !(m.temperature > 0.0)) throw FormatError("colormap: bins must be >= 1 and temperature > 0");
    const std::size_t nb = std::size_t(m.bins);
    if (j.contains("centroids")) {
      m.centroids = j.at("centroids").get<std::array<std::vector<double>, 3>>();
      m.params = j.at("params").get<std::vector<double>>();
    } else {
      const auto flat = unpack_f32(base64::decode(j.at("centroids_b64").get<std::string>()), "centroid");
      if (flat.size() != 3 * nb) throw FormatError("colormap: centroid payload has wrong length");
      for (std::size_t c = 0; c < 3; ++c) m.centroids[c].assign(flat.begin() + long(c * nb), flat.begin() + long((c + 1) * nb));
      m.params = unpack_f32(base64::decode(j.at("params_b64").get<std::string>()), "parameter");
    }
    for (const auto& c : m.centroids) {
      if (c.size() != nb) throw FormatError("colormap: centroid list length differs from bins");
    }
    std::size_t expect = 0;
    switch (m.variant) {
      case ColorMapVariant::Linear3x3: expect = 9; break;
      case ColorMapVariant::ColorBlur: expect = 3 * m.height * m.width; break;
      default: expect = 3 * nb * m.params_per_bin(); break;
    }
    if (m.params.size() != expect) {
      throw FormatError("colormap: expected " + std::to_string(expect) + " parameters, found " +
                        std::to_string(m.params.size()));
    }
    m.fitted = true;
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("colormap: ") + e.what());
  }
}

void save_model(const std::string& path, const ColorMapModel& model) {
  const std::string text = model_to_json(model) + "\n";
  binio::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

ColorMapModel load_model(const std::string& path) {
  const auto bytes = binio::read_file(path);
  return model_from_json(std::string(bytes.begin(), bytes.end()));
}

namespace base64 {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t b0 = bytes[i];
    const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t v = (b0 << 16) | (b1 << 8) | b2;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < bytes.size() ? kAlphabet[v & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> decode(std::string_view text) {
  auto value = [](char ch) -> int {
    if (ch >= 'A' && ch <= 'Z') return ch - 'A';
    if (ch >= 'a' && ch <= 'z') return ch - 'a' + 26;
    if (ch >= '0' && ch <= '9') return ch - '0' + 52;
    if (ch == '+') return 62;
    if (ch == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw FormatError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      int d = 0;
      if (ch == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        d = value(ch);
        if (d < 0 || pad > 0) throw FormatError("base64: invalid character at offset " + std::to_string(i + k));
      }
      v = (v << 6) | std::uint32_t(d);
    }
    out.push_back(std::uint8_t(v >> 16));
    if (pad < 2) out.push_back(std::uint8_t(v >> 8));
    if (pad < 1) out.push_back(std::uint8_t(v));
  }
  return out;
}

}  // namespace base64

}  // namespace ispw
