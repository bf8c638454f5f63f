#pragma once

#include "fourierflow/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <stdexcept>
#include <vector>

namespace fourierflow {

/// A 3D trajectory over normalized time, one sine-cosine Fourier series per
/// axis:
///
///   f_d(t) = a_d0 / 2 + sum_{n=1..N} ( a_dn cos(n w t) + b_dn sin(n w t) )
///
/// `angular_scale` w is the angular frequency multiplying n*t inside the
/// trigonometric arguments. With w = 2*pi the basis is orthogonal and
/// periodic on a unit time span; w = 1 evaluates the raw cos(nt)/sin(nt)
/// form. Total coefficient count is 6N+3.
struct FourierSeries3 {
  int n_harmonics = 0;             // N >= 0
  double angular_scale = kTwoPi;   // w > 0
  Eigen::Matrix3Xd cos_coeffs;     // 3 x (N+1), columns a_0..a_N
  Eigen::Matrix3Xd sin_coeffs;     // 3 x N,     columns b_1..b_N

  static FourierSeries3 zero(int n_harmonics, double angular_scale = kTwoPi) {
    if (n_harmonics < 0) throw std::invalid_argument("n_harmonics must be >= 0");
    if (!(angular_scale > 0.0)) throw std::invalid_argument("angular_scale must be > 0");
    FourierSeries3 s;
    s.n_harmonics = n_harmonics;
    s.angular_scale = angular_scale;
    s.cos_coeffs = Eigen::Matrix3Xd::Zero(3, n_harmonics + 1);
    s.sin_coeffs = Eigen::Matrix3Xd::Zero(3, n_harmonics);
    return s;
  }

  int coefficient_count() const { return 6 * n_harmonics + 3; }

  /// Evaluate at time t. Total on finite inputs; t outside the fitted span
  /// extrapolates the trigonometric expansion. Cost is independent of t.
  Vec3 eval(double t) const {
    Vec3 out = 0.5 * cos_coeffs.col(0);
    const double c1 = std::cos(angular_scale * t);
    const double s1 = std::sin(angular_scale * t);
    double cn = 1.0, sn = 0.0;
    for (int n = 1; n <= n_harmonics; ++n) {
      const double c = cn * c1 - sn * s1;  // cos(n w t), sin(n w t) by rotation
      const double s = sn * c1 + cn * s1;
      cn = c;
      sn = s;
      out += cos_coeffs.col(n) * cn + sin_coeffs.col(n - 1) * sn;
    }
    return out;
  }

  /// Term-wise derivative of order 1 or 2 evaluated at t.
  Vec3 derivative(double t, int order) const {
    if (order != 1 && order != 2)
      throw std::invalid_argument("derivative order must be 1 or 2");
    Vec3 out = Vec3::Zero();
    const double c1 = std::cos(angular_scale * t);
    const double s1 = std::sin(angular_scale * t);
    double cn = 1.0, sn = 0.0;
    for (int n = 1; n <= n_harmonics; ++n) {
      const double c = cn * c1 - sn * s1;
      const double s = sn * c1 + cn * s1;
      cn = c;
      sn = s;
      const double k = double(n) * angular_scale;
      if (order == 1) {
        out += k * (sin_coeffs.col(n - 1) * cn - cos_coeffs.col(n) * sn);
      } else {
        out -= k * k * (cos_coeffs.col(n) * cn + sin_coeffs.col(n - 1) * sn);
      }
    }
    return out;
  }

  /// Integral of the squared second-derivative norm over one basis period
  /// P = 2*pi/w. Closed form: sum_d sum_n (n w)^4 (a_dn^2 + b_dn^2) * P / 2.
  double smoothness_energy() const {
    const double period = kTwoPi / angular_scale;
    double total = 0.0;
    for (int n = 1; n <= n_harmonics; ++n) {
      const double k = double(n) * angular_scale;
      const double k4 = k * k * k * k;
      total += k4 * (cos_coeffs.col(n).squaredNorm() +
                     sin_coeffs.col(n - 1).squaredNorm());
    }
    return total * 0.5 * period;
  }

  FourierSeries3 operator+(const FourierSeries3& other) const {
    if (other.n_harmonics != n_harmonics || other.angular_scale != angular_scale)
      throw std::invalid_argument("series shape mismatch in operator+");
    FourierSeries3 out = *this;
    out.cos_coeffs += other.cos_coeffs;
    out.sin_coeffs += other.sin_coeffs;
    return out;
  }

  FourierSeries3 operator*(double scale) const {
    FourierSeries3 out = *this;
    out.cos_coeffs *= scale;
    out.sin_coeffs *= scale;
    return out;
  }
};

/// Discretized 3D trajectory observations: strictly increasing times (the
/// normalized span is conventionally within [0, 1]) with one point each.
struct TimedSamples3 {
  std::vector<double> times;
  std::vector<Vec3> values;

  std::size_t size() const { return times.size(); }

  void validate() const {
    if (times.size() != values.size())
      throw std::invalid_argument("times/values length mismatch");
    if (times.empty()) throw std::invalid_argument("empty sample set");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!std::isfinite(times[i]) || !values[i].allFinite())
        throw std::invalid_argument("non-finite sample");
      if (i > 0 && !(times[i] > times[i - 1]))
        throw std::invalid_argument("times must be strictly increasing");
    }
  }
};

/// Low-pass projection fit: approximates the Fourier projection integrals
/// a_n = 2 Int f(t) cos(n w t) dt, b_n = 2 Int f(t) sin(n w t) dt with the
/// trapezoidal rule over the sample span, treating the span as one period
/// (the integrals are normalized by the span length). No wrap-around sample
/// is synthesized; samples covering a full period give spectral accuracy.
inline FourierSeries3 fit_projection(const TimedSamples3& samples,
                                     int n_harmonics,
                                     double angular_scale = kTwoPi) {
  samples.validate();
  if (samples.size() < 2)
    throw std::invalid_argument("fit_projection needs at least 2 samples");
  FourierSeries3 out = FourierSeries3::zero(n_harmonics, angular_scale);
  const std::size_t count = samples.size();
  const double span = samples.times.back() - samples.times.front();

  for (int n = 0; n <= n_harmonics; ++n) {
    Vec3 cos_sum = Vec3::Zero();
    Vec3 sin_sum = Vec3::Zero();
    double prev_c = 0.0, prev_s = 0.0;
    Vec3 prev_vc = Vec3::Zero(), prev_vs = Vec3::Zero();
    for (std::size_t k = 0; k < count; ++k) {
      const double arg = angular_scale * double(n) * samples.times[k];
      const double c = std::cos(arg), s = std::sin(arg);
      const Vec3 vc = samples.values[k] * c;
      const Vec3 vs = samples.values[k] * s;
      if (k > 0) {
        const double h = samples.times[k] - samples.times[k - 1];
        cos_sum += 0.5 * h * (prev_vc + vc);
        sin_sum += 0.5 * h * (prev_vs + vs);
      }
      prev_c = c;
      prev_s = s;
      prev_vc = vc;
      prev_vs = vs;
    }
    (void)prev_c;
    (void)prev_s;
    out.cos_coeffs.col(n) = 2.0 / span * cos_sum;
    if (n >= 1) out.sin_coeffs.col(n - 1) = 2.0 / span * sin_sum;
  }
  return out;
}

namespace detail {

/// Design matrix row: [1/2, cos(w t)..cos(N w t), sin(w t)..sin(N w t)],
/// matching the a_0/2 convention so solved coefficients are stored directly.
inline Eigen::MatrixXd fourier_design(const std::vector<double>& times,
                                      int n_harmonics, double angular_scale) {
  const int dim = 2 * n_harmonics + 1;
  Eigen::MatrixXd design(times.size(), dim);
  for (std::size_t k = 0; k < times.size(); ++k) {
    design(k, 0) = 0.5;
    for (int n = 1; n <= n_harmonics; ++n) {
      const double arg = angular_scale * double(n) * times[k];
      design(k, n) = std::cos(arg);
      design(k, n_harmonics + n) = std::sin(arg);
    }
  }
  return design;
}

}  // namespace detail

/// Ridge-regularized least-squares fit, solved per axis through the normal
/// equations with a dense symmetric factorization. With ridge = 0 the system
/// must be full rank (>= 2N+1 independent samples) or a rank-deficiency
/// error is thrown.
inline FourierSeries3 fit_least_squares(const TimedSamples3& samples,
                                        int n_harmonics, double angular_scale,
                                        double ridge) {
  samples.validate();
  if (ridge < 0.0) throw std::invalid_argument("ridge must be >= 0");
  FourierSeries3 out = FourierSeries3::zero(n_harmonics, angular_scale);
  const int dim = 2 * n_harmonics + 1;

  const Eigen::MatrixXd design =
      detail::fourier_design(samples.times, n_harmonics, angular_scale);
  Eigen::MatrixXd normal = design.transpose() * design;
  normal.diagonal().array() += ridge;

  if (ridge == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    if (lu.rank() < dim)
      throw std::runtime_error(
          "fit_least_squares: rank-deficient normal matrix with ridge = 0");
  }

  Eigen::MatrixXd rhs(dim, 3);
  rhs.setZero();
  for (std::size_t k = 0; k < samples.size(); ++k)
    rhs += design.row(k).transpose() * samples.values[k].transpose();

  const Eigen::MatrixXd solution = normal.ldlt().solve(rhs);  // dim x 3
  for (int n = 0; n <= n_harmonics; ++n)
    out.cos_coeffs.col(n) = solution.row(n).transpose();
  for (int n = 1; n <= n_harmonics; ++n)
    out.sin_coeffs.col(n - 1) = solution.row(n_harmonics + n).transpose();
  return out;
}

inline void to_json(nlohmann::json& j, const FourierSeries3& s) {
  nlohmann::json cos_rows = nlohmann::json::array();
  nlohmann::json sin_rows = nlohmann::json::array();
  for (int d = 0; d < 3; ++d) {
    nlohmann::json cr = nlohmann::json::array();
    for (int n = 0; n <= s.n_harmonics; ++n) cr.push_back(s.cos_coeffs(d, n));
    cos_rows.push_back(std::move(cr));
    nlohmann::json sr = nlohmann::json::array();
    for (int n = 0; n < s.n_harmonics; ++n) sr.push_back(s.sin_coeffs(d, n));
    sin_rows.push_back(std::move(sr));
  }
  j = nlohmann::json{{"n_harmonics", s.n_harmonics},
                     {"angular_scale", s.angular_scale},
                     {"cos", cos_rows},
                     {"sin", sin_rows}};
}

inline void from_json(const nlohmann::json& j, FourierSeries3& s) {
  const int n = j.at("n_harmonics").get<int>();
  s = FourierSeries3::zero(n, j.at("angular_scale").get<double>());
  const auto& cos_rows = j.at("cos");
  const auto& sin_rows = j.at("sin");
  if (cos_rows.size() != 3 || sin_rows.size() != 3)
    throw std::invalid_argument("fourier json: expected 3 coefficient rows");
  for (int d = 0; d < 3; ++d) {
    if (int(cos_rows[d].size()) != n + 1 || int(sin_rows[d].size()) != n)
      throw std::invalid_argument("fourier json: coefficient row length");
    for (int k = 0; k <= n; ++k) s.cos_coeffs(d, k) = cos_rows[d][k].get<double>();
    for (int k = 0; k < n; ++k) s.sin_coeffs(d, k) = sin_rows[d][k].get<double>();
  }
}

}  // namespace fourierflow
