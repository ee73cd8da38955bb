#include "polymoe/approx_probe.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "polymoe/quadrature.hpp"
#include "polymoe/threading.hpp"

namespace polymoe {

long PiecewiseFit::cell_count() const {
  long r = 1;
  for (int i = 0; i < s; ++i) r *= cells_per_axis;
  return r;
}

void PiecewiseFit::cell_bounds(long idx, Eigen::VectorXd& lo, double& width) const {
  width = 2.0 / cells_per_axis;
  lo.resize(s);
  for (int d = s - 1; d >= 0; --d) {
    lo[d] = -1.0 + (idx % cells_per_axis) * width;
    idx /= cells_per_axis;
  }
}

long PiecewiseFit::cell_of(const Eigen::VectorXd& x) const {
  long idx = 0;
  for (int d = 0; d < s; ++d) {
    int c = static_cast<int>((x[d] + 1.0) / (2.0 / cells_per_axis));
    c = std::min(std::max(c, 0), cells_per_axis - 1);
    idx = idx * cells_per_axis + c;
  }
  return idx;
}

namespace {

// Gauss-Legendre tensor points of one cell, with combined quadrature x p_x
// weights.
void cell_points(const PiecewiseFit& fit, const TargetSpec& target, long cell,
                 const GaussLegendre& gl, std::vector<Eigen::VectorXd>& pts,
                 std::vector<double>& wts) {
  Eigen::VectorXd lo;
  double w;
  fit.cell_bounds(cell, lo, w);
  const double half = 0.5 * w;
  pts.clear();
  wts.clear();
  const int q = static_cast<int>(gl.nodes.size());
  Eigen::VectorXd x(fit.s);
  if (fit.s == 1) {
    for (int i = 0; i < q; ++i) {
      x[0] = lo[0] + half * (gl.nodes[i] + 1.0);
      pts.push_back(x);
      wts.push_back(gl.weights[i] * half * target.px.density(x));
    }
  } else {
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) {
        x[0] = lo[0] + half * (gl.nodes[i] + 1.0);
        x[1] = lo[1] + half * (gl.nodes[j] + 1.0);
        pts.push_back(x);
        wts.push_back(gl.weights[i] * gl.weights[j] * half * half *
                      target.px.density(x));
      }
  }
}

}  // namespace

PiecewiseFit piecewise_fit(const TargetSpec& target, int cells_per_axis, int k,
                           int n_quad) {
  if (target.s != 1 && target.s != 2)
    throw std::invalid_argument("piecewise_fit: s must be 1 or 2");
  if (cells_per_axis < 1)
    throw std::invalid_argument("piecewise_fit: need at least one cell");
  PiecewiseFit fit;
  fit.s = target.s;
  fit.k = k;
  fit.cells_per_axis = cells_per_axis;
  fit.n_quad = n_quad;
  fit.basis = PolyBasis(target.s, k);
  const int J = fit.basis.dimension();
  const long q_per_cell =
      target.s == 1 ? n_quad : static_cast<long>(n_quad) * n_quad;
  if (q_per_cell < J)
    throw std::invalid_argument("piecewise_fit: n_quad too small for the basis");

  const GaussLegendre gl = gauss_legendre(n_quad);
  const long r = fit.cell_count();
  fit.cell_coeffs.assign(static_cast<std::size_t>(r), Eigen::VectorXd::Zero(J));

  parallel_for(static_cast<std::size_t>(r), [&](std::size_t cell) {
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> wts;
    cell_points(fit, target, static_cast<long>(cell), gl, pts, wts);
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(J, J);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(J);
    Eigen::VectorXd b(J);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      fit.basis.eval_into(pts[p], b);
      ata.noalias() += wts[p] * b * b.transpose();
      atb.noalias() += wts[p] * target.h(pts[p]) * b;
    }
    ata.diagonal().array() += 1e-13;  // guards degenerate weights
    fit.cell_coeffs[cell] = ata.ldlt().solve(atb);
  });
  return fit;
}

double probe_divergence(const TargetSpec& target, const PiecewiseFit& fit) {
  const GaussLegendre gl = gauss_legendre(fit.n_quad);
  const long r = fit.cell_count();
  std::vector<double> partial(static_cast<std::size_t>(r), 0.0);
  parallel_for(static_cast<std::size_t>(r), [&](std::size_t cell) {
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> wts;
    cell_points(fit, target, static_cast<long>(cell), gl, pts, wts);
    double acc = 0.0;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const double e =
          fit.basis.eval_poly(fit.cell_coeffs[cell], pts[p]) - target.h(pts[p]);
      acc += wts[p] * e * e;
    }
    partial[cell] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;  // fixed order
  return total;
}

MoEParams soft_gated_model(const PiecewiseFit& fit, const ExpFamily& family,
                           double beta) {
  const long r = fit.cell_count();
  MoEParams model;
  model.family = family;
  model.basis = fit.basis;
  model.experts = fit.cell_coeffs;
  model.x_scaling = XScaling::identity(fit.s);
  model.gate = GateParams::zeros(static_cast<int>(r), fit.s);

  // logits beta(2 c_j . x - |c_j|^2): softmax selects the nearest center
  Eigen::VectorXd lo, c_last;
  double w;
  fit.cell_bounds(r - 1, lo, w);
  c_last = lo.array() + 0.5 * w;
  for (long j = 0; j < r - 1; ++j) {
    fit.cell_bounds(j, lo, w);
    const Eigen::VectorXd c = lo.array() + 0.5 * w;
    model.gate.W(j, 0) = beta * (c_last.squaredNorm() - c.squaredNorm());
    for (int d = 0; d < fit.s; ++d)
      model.gate.W(j, d + 1) = 2.0 * beta * (c[d] - c_last[d]);
  }
  return model;
}

ProbeResult rate_slope(const TargetSpec& target, const std::vector<int>& ms, int k,
                       int n_quad) {
  if (ms.size() < 4)
    throw std::invalid_argument("rate_slope: need at least four partition sizes");
  ProbeResult res;
  res.theory_slope = -2.0 * std::min(target.alpha, static_cast<double>(k + 1)) /
                     target.s;
  for (int m : ms) {
    const PiecewiseFit fit = piecewise_fit(target, m, k, n_quad);
    const double d = probe_divergence(target, fit);
    res.ms.push_back(m);
    res.rs.push_back(fit.cell_count());
    res.Ds.push_back(d);
    if (d <= 1e-24) res.slope_defined = false;  // realizable up to roundoff
  }
  if (res.slope_defined) {
    // least squares of log D against log r
    const std::size_t n = res.Ds.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double lx = std::log(static_cast<double>(res.rs[i]));
      const double ly = std::log(res.Ds[i]);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    res.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return res;
}

}  // namespace polymoe
