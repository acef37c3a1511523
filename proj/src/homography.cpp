#include "crackalign/homography.hpp"

#include "crackalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crackalign {

namespace {

constexpr double kWEps = 1e-12;
constexpr double kInlierGateFactor = 2.4474476501040833; // sqrt(5.99)
constexpr double kSigmaFloor = 0.25;

Homography matmul(const Homography& a, const Homography& b) {
    Homography r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += a.h[3 * i + k] * b.h[3 * k + j];
            r.h[3 * i + j] = acc;
        }
    return r;
}

// Eigen-decomposition of a symmetric 9x9 matrix by cyclic Jacobi rotations.
// Operates on the max-norm-scaled matrix so the 1e-12 convergence gate is
// scale-free. Returns eigenvalues ascending with matching eigenvectors.
struct EigenResult {
    std::array<double, 9> values{};
    std::array<std::array<double, 9>, 9> vectors{}; // vectors[k] = k-th eigenvector
};

EigenResult jacobi_eigen_9(std::array<std::array<double, 9>, 9> m) {
    constexpr int n = 9;
    constexpr int kMaxSweeps = 100;
    constexpr double kOffTol = 1e-12;

    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(m[i][j]));
    if (scale == 0.0) scale = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m[i][j] /= scale;

    std::array<std::array<double, 9>, 9> v{};
    for (int i = 0; i < n; ++i) v[i][i] = 1.0;

    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(m[p][q]));
        if (off < kOffTol) {
            converged = true;
            break;
        }
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = m[p][q];
                if (std::fabs(apq) < kOffTol * 1e-3) continue;
                const double tau = (m[q][q] - m[p][p]) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(m[p][q]));
        if (off >= kOffTol) throw EstimationError("eigen solve did not converge within 100 sweeps");
    }

    std::array<int, 9> order{};
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return m[a][a] < m[b][b]; });

    EigenResult r;
    for (int k = 0; k < n; ++k) {
        r.values[k] = m[order[k]][order[k]]; // scale-free eigenvalues
        for (int i = 0; i < n; ++i) r.vectors[k][i] = v[i][order[k]];
    }
    return r;
}

EigenResult eigen_of_normal_matrix(const std::vector<std::array<double, 9>>& rows) {
    std::array<std::array<double, 9>, 9> m{};
    for (const auto& row : rows)
        for (int i = 0; i < 9; ++i)
            for (int j = i; j < 9; ++j) m[i][j] += row[i] * row[j];
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < i; ++j) m[i][j] = m[j][i];
    return jacobi_eigen_9(m);
}

void correspondence_rows(const std::vector<Vec2>& p1, const std::vector<Vec2>& p2,
                         std::vector<std::array<double, 9>>& rows) {
    rows.clear();
    rows.reserve(2 * p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const double x = p1[i].x, y = p1[i].y;
        const double u = p2[i].x, v = p2[i].y;
        rows.push_back({0, 0, 0, -x, -y, -1, v * x, v * y, v});
        rows.push_back({x, y, 1, 0, 0, 0, -u * x, -u * y, -u});
    }
}

} // namespace

double Homography::det() const {
    return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
           h[2] * (h[3] * h[7] - h[4] * h[6]);
}

double Homography::frobenius_distance(const Homography& other) const {
    double acc = 0.0;
    for (int i = 0; i < 9; ++i) {
        const double d = h[i] - other.h[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

Homography canonical(const Homography& H) {
    Homography r = H;
    if (std::fabs(r.h[8]) > kWEps) {
        const double w = r.h[8];
        for (double& e : r.h) e /= w; // h33/h33 == 1.0 exactly, so this is idempotent
        return r;
    }
    double norm = 0.0;
    for (double e : r.h) norm += e * e;
    norm = std::sqrt(norm);
    if (norm < kWEps) throw EstimationError("canonical: zero matrix");
    for (double& e : r.h) e /= norm;
    for (double e : r.h) {
        if (std::fabs(e) > kWEps) {
            if (e < 0.0)
                for (double& f : r.h) f = -f;
            break;
        }
    }
    return r;
}

Vec2 apply(const Homography& H, Vec2 p) {
    Vec2 out;
    if (!try_apply(H, p, out)) throw EstimationError("apply: point maps to infinity");
    return out;
}

bool try_apply(const Homography& H, Vec2 p, Vec2& out) {
    const double w = H.h[6] * p.x + H.h[7] * p.y + H.h[8];
    if (std::fabs(w) < kWEps) return false;
    out.x = (H.h[0] * p.x + H.h[1] * p.y + H.h[2]) / w;
    out.y = (H.h[3] * p.x + H.h[4] * p.y + H.h[5]) / w;
    return true;
}

Homography invert(const Homography& H) {
    const double d = H.det();
    if (std::fabs(d) < kWEps) throw EstimationError("invert: singular matrix");
    const auto& h = H.h;
    Homography r;
    r.h = {h[4] * h[8] - h[5] * h[7], h[2] * h[7] - h[1] * h[8], h[1] * h[5] - h[2] * h[4],
           h[5] * h[6] - h[3] * h[8], h[0] * h[8] - h[2] * h[6], h[2] * h[3] - h[0] * h[5],
           h[3] * h[7] - h[4] * h[6], h[1] * h[6] - h[0] * h[7], h[0] * h[4] - h[1] * h[3]};
    for (double& e : r.h) e /= d;
    return canonical(r);
}

std::pair<Homography, std::vector<Vec2>> normalize_points(std::span<const Vec2> pts) {
    if (pts.size() < 2) throw std::invalid_argument("normalize_points: need at least 2 points");
    double cx = 0.0, cy = 0.0;
    for (const Vec2& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= pts.size();
    cy /= pts.size();
    double mean_dist = 0.0;
    for (const Vec2& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
    mean_dist /= pts.size();
    if (mean_dist < kWEps) throw EstimationError("normalize_points: all points coincident");
    const double s = std::sqrt(2.0) / mean_dist;

    Homography t;
    t.h = {s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1};
    std::vector<Vec2> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        out[i] = {s * (pts[i].x - cx), s * (pts[i].y - cy)};
    return {t, std::move(out)};
}

std::array<double, 9> smallest_singular_vector(const std::vector<std::array<double, 9>>& rows) {
    if (rows.size() < 8) throw std::invalid_argument("smallest_singular_vector: need >= 8 rows");
    const EigenResult e = eigen_of_normal_matrix(rows);
    return e.vectors[0];
}

Homography dlt(std::span<const Correspondence> cs) {
    if (cs.size() < 4) throw std::invalid_argument("dlt: need >= 4 correspondences");
    std::vector<Vec2> p1(cs.size()), p2(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
        p1[i] = cs[i].p1;
        p2[i] = cs[i].p2;
    }
    auto [t1, n1] = normalize_points(p1);
    auto [t2, n2] = normalize_points(p2);

    std::vector<std::array<double, 9>> rows;
    correspondence_rows(n1, n2, rows);
    const EigenResult e = eigen_of_normal_matrix(rows);
    if (e.values[1] - e.values[0] <= 1e-9)
        throw EstimationError("dlt: degenerate configuration (smallest eigenvalue not unique)");

    Homography hn;
    std::copy(e.vectors[0].begin(), e.vectors[0].end(), hn.h.begin());
    const Homography H = canonical(matmul(matmul(invert(t2), hn), t1));
    if (std::fabs(H.det()) < kWEps) throw EstimationError("dlt: rank-deficient homography");
    return H;
}

double reprojection_error(const Homography& H, const Correspondence& c) {
    const Vec2 q = apply(H, c.p1);
    return std::hypot(q.x - c.p2.x, q.y - c.p2.y);
}

double update_sigma(std::span<const double> errors) {
    if (errors.empty()) throw std::invalid_argument("update_sigma: empty error list");
    double acc = 0.0;
    for (double e : errors) acc += e * e;
    return std::max(std::sqrt(acc / errors.size()), kSigmaFloor);
}

int required_iterations(double p, double e, int k, int cap) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("required_iterations: p must lie in (0,1)");
    if (!(e >= 0.0 && e < 1.0)) throw std::invalid_argument("required_iterations: e must lie in [0,1)");
    if (k < 4) throw std::invalid_argument("required_iterations: k must be >= 4");
    if (cap < 1) throw std::invalid_argument("required_iterations: cap must be >= 1");
    if (e == 0.0) return 1;
    const double w = std::pow(1.0 - e, k);
    const double denom = std::log1p(-w);
    if (!(denom < 0.0)) return cap; // (1-e)^k underflowed
    const double n = std::ceil(std::log1p(-p) / denom);
    if (!(n < static_cast<double>(cap))) return cap;
    return std::max(1, static_cast<int>(n));
}

namespace {

// Per-iteration record. Errors are kept sorted with prefix sums so the
// sequential merge can classify against any later sigma in O(log n).
struct IterationFit {
    bool ok = false;
    Homography model;
    std::vector<double> errors;     // ascending
    std::vector<double> prefix;     // prefix[i] = sum of errors[0..i)
    std::vector<double> prefix_sq;  // squared-error prefix sums
};

void fit_iteration(std::span<const Correspondence> ms, const RansacConfig& cfg, std::uint64_t iteration,
                   std::vector<int>& scratch, IterationFit& out) {
    out.ok = false;
    const int n = static_cast<int>(ms.size());
    Rng rng = Rng::fork(cfg.seed, iteration);
    scratch.resize(n);
    std::iota(scratch.begin(), scratch.end(), 0);
    std::vector<Correspondence> sample(cfg.sample_size);
    for (int j = 0; j < cfg.sample_size; ++j) {
        const int pick = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - j)));
        std::swap(scratch[j], scratch[pick]);
        sample[j] = ms[scratch[j]];
    }
    try {
        out.model = dlt(sample);
    } catch (const EstimationError&) {
        return; // degenerate sample, skip this iteration
    }
    out.errors.resize(n);
    for (int i = 0; i < n; ++i) {
        Vec2 q;
        out.errors[i] = try_apply(out.model, ms[i].p1, q)
                            ? std::hypot(q.x - ms[i].p2.x, q.y - ms[i].p2.y)
                            : std::numeric_limits<double>::infinity();
    }
    std::sort(out.errors.begin(), out.errors.end());
    out.prefix.resize(n + 1);
    out.prefix_sq.resize(n + 1);
    out.prefix[0] = out.prefix_sq[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        out.prefix[i + 1] = out.prefix[i] + out.errors[i];
        out.prefix_sq[i + 1] = out.prefix_sq[i] + out.errors[i] * out.errors[i];
    }
    out.ok = true;
}

} // namespace

RansacResult ransac(std::span<const Correspondence> matches, const RansacConfig& cfg) {
    const int n = static_cast<int>(matches.size());
    if (cfg.sample_size < 4) throw std::invalid_argument("ransac: sample size must be >= 4");
    if (!(cfg.initial_sigma > 0.0)) throw std::invalid_argument("ransac: initial sigma must be positive");
    if (n < std::max(4, cfg.sample_size))
        throw EstimationError("ransac: fewer correspondences than the sample size");

    double sigma = cfg.initial_sigma;
    double outlier_ratio = cfg.initial_outlier_ratio;
    int budget = required_iterations(cfg.confidence, outlier_ratio, cfg.sample_size, cfg.max_iterations);

    bool have_best = false;
    Homography best_model;
    int best_count = 0;
    double best_total = std::numeric_limits<double>::infinity();

    // Iterations are computed in parallel blocks; the merge walks them in
    // iteration order and applies the sigma/budget updates sequentially, so
    // the outcome matches a serial run for any thread count. Iterations a
    // shrinking budget would not have reached are discarded.
    constexpr int kBlock = 64;
    std::vector<IterationFit> block(kBlock);
    int iterations_run = 0;
    int next_iteration = 0;
    while (next_iteration < budget) {
        const int count = std::min(kBlock, budget - next_iteration);
#pragma omp parallel
        {
            std::vector<int> scratch;
#pragma omp for schedule(dynamic)
            for (int b = 0; b < count; ++b)
                fit_iteration(matches, cfg, static_cast<std::uint64_t>(next_iteration + b), scratch, block[b]);
        }
        for (int b = 0; b < count; ++b) {
            const int iter = next_iteration + b;
            if (iter >= budget) break;
            ++iterations_run;
            const IterationFit& fit = block[b];
            if (!fit.ok) continue;
            const double gate = kInlierGateFactor * sigma;
            const auto split = std::lower_bound(fit.errors.begin(), fit.errors.end(), gate);
            const int inl = static_cast<int>(split - fit.errors.begin());
            const double total = fit.prefix[inl];
            const bool improves = !have_best || inl > best_count || (inl == best_count && total < best_total);
            if (!improves) continue;
            have_best = true;
            best_model = fit.model;
            best_count = inl;
            best_total = total;
            // sigma and the iteration budget follow the incumbent best model,
            // but only once it carries a meaningful consensus: letting a
            // 2-3-inlier fluke set the gate from its own RMS inflates sigma,
            // which admits worse models, which inflate it further
            if (inl >= std::max(4, cfg.sample_size)) {
                sigma = std::max(std::sqrt(fit.prefix_sq[inl] / inl), kSigmaFloor);
                outlier_ratio = std::min(outlier_ratio, 1.0 - static_cast<double>(inl) / n);
                budget = std::min(budget, required_iterations(cfg.confidence, outlier_ratio,
                                                              cfg.sample_size, cfg.max_iterations));
            }
        }
        next_iteration += count;
    }

    if (!have_best) throw EstimationError("ransac: no model could be fitted");

    // One final classification with the final sigma against the pre-refinement
    // best model, then a least-squares refit over that inlier set.
    const double gate = kInlierGateFactor * sigma;
    RansacResult result;
    result.raw_h = best_model;
    result.inliers.assign(n, 0);
    std::vector<Correspondence> inlier_set;
    for (int i = 0; i < n; ++i) {
        Vec2 q;
        if (!try_apply(best_model, matches[i].p1, q)) continue;
        if (std::hypot(q.x - matches[i].p2.x, q.y - matches[i].p2.y) < gate) {
            result.inliers[i] = 1;
            inlier_set.push_back(matches[i]);
        }
    }
    result.inlier_count = static_cast<int>(inlier_set.size());
    if (result.inlier_count < 4) throw EstimationError("ransac: no model with >= 4 inliers");

    try {
        result.h = dlt(inlier_set);
    } catch (const EstimationError&) {
        result.h = best_model; // refinement degenerate, keep the sampled model
    }
    result.sigma_final = sigma;
    result.iterations_run = iterations_run;
    result.total_error = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!result.inliers[i]) continue;
        Vec2 q;
        if (try_apply(result.h, matches[i].p1, q))
            result.total_error += std::hypot(q.x - matches[i].p2.x, q.y - matches[i].p2.y);
    }
    return result;
}

} // namespace crackalign
