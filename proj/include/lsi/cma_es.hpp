#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "lsi/error.hpp"
#include "lsi/random.hpp"

namespace lsi {

/// Strategy constants with the standard CMA-ES defaults (positive recombination weights only).
struct CmaParameters {
    int dim = 0;
    int lambda = 0;
    int mu = 0;
    Eigen::VectorXd weights; // length lambda, zero beyond mu, sums to 1
    double mueff = 0.0;
    double cs = 0.0;
    double ds = 0.0;
    double cc = 0.0;
    double c1 = 0.0;
    double cmu = 0.0;
    double chi_n = 0.0;

    static CmaParameters standard(int dim, int lambda)
    {
        CmaParameters p;
        const double n = dim;
        p.dim = dim;
        p.lambda = lambda;
        p.mu = lambda / 2;
        p.weights = Eigen::VectorXd::Zero(lambda);
        for (int i = 0; i < p.mu; ++i)
            p.weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
        p.weights /= p.weights.sum();
        p.mueff = 1.0 / p.weights.squaredNorm();
        p.cs = (p.mueff + 2.0) / (n + p.mueff + 5.0);
        p.ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mueff - 1.0) / (n + 1.0)) - 1.0) + p.cs;
        p.cc = (4.0 + p.mueff / n) / (n + 4.0 + 2.0 * p.mueff / n);
        p.c1 = 2.0 / ((n + 1.3) * (n + 1.3) + p.mueff);
        p.cmu = std::min(1.0 - p.c1, 2.0 * (p.mueff - 2.0 + 1.0 / p.mueff) / ((n + 2.0) * (n + 2.0) + p.mueff));
        p.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        return p;
    }
};

inline constexpr double kMaxCondition = 1e14;

class CovarianceDegenerate : public Error {
public:
    CovarianceDegenerate() : Error("covariance matrix degenerate") {}
};

class NonFiniteUpdate : public Error {
public:
    NonFiniteUpdate() : Error("CMA-ES update produced non-finite values") {}
};

class CmaError : public Error {
public:
    using Error::Error;
};

/// A CMA-ES search distribution N(mean, sigma^2 C) with its evolution paths.
struct EmitterState {
    Eigen::VectorXd mean;
    double sigma = 0.0;
    double initial_sigma = 0.0;
    Eigen::MatrixXd cov;
    Eigen::VectorXd path_sigma;
    Eigen::VectorXd path_c;
    CmaParameters params;
    long generation = 0;
    int restarts = 0;

    // cov = basis * diag(scales^2) * basis^T, refreshed once per generation
    Eigen::MatrixXd basis;
    Eigen::VectorXd scales;
    bool decomposed = false;

    int dim() const { return static_cast<int>(mean.size()); }
    int lambda() const { return params.lambda; }

    static EmitterState create(Eigen::VectorXd mean, double sigma, int lambda)
    {
        if (lambda < 2)
            throw CmaError("CMA-ES population size must be >= 2");
        if (!(sigma > 0.0))
            throw CmaError("CMA-ES step size must be positive");
        EmitterState s;
        const auto n = static_cast<int>(mean.size());
        s.mean = std::move(mean);
        s.sigma = sigma;
        s.initial_sigma = sigma;
        s.params = CmaParameters::standard(n, lambda);
        s.reset_distribution();
        return s;
    }

    /// Identity covariance, zero paths, initial step size. Mean is replaced.
    void restart(Eigen::VectorXd new_mean)
    {
        mean = std::move(new_mean);
        sigma = initial_sigma;
        reset_distribution();
        ++restarts;
    }

    /// Eigendecomposition of the covariance; throws CovarianceDegenerate on a bad matrix.
    void decompose()
    {
        if (!cov.allFinite())
            throw CovarianceDegenerate();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success)
            throw CovarianceDegenerate();
        const Eigen::VectorXd values = eig.eigenvalues();
        const double lo = values.minCoeff();
        const double hi = values.maxCoeff();
        if (!(lo > 0.0) || hi / lo > kMaxCondition)
            throw CovarianceDegenerate();
        basis = eig.eigenvectors();
        scales = values.cwiseSqrt();
        decomposed = true;
    }

private:
    void reset_distribution()
    {
        const auto n = static_cast<int>(mean.size());
        cov = Eigen::MatrixXd::Identity(n, n);
        path_sigma = Eigen::VectorXd::Zero(n);
        path_c = Eigen::VectorXd::Zero(n);
        basis = Eigen::MatrixXd::Identity(n, n);
        scales = Eigen::VectorXd::Ones(n);
        generation = 0;
        decomposed = true;
    }
};

/// Draws lambda samples mean + sigma * B * D * N(0, I).
inline std::vector<Eigen::VectorXd> cma_ask(EmitterState& s, Rng& rng)
{
    s.decompose();
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(s.lambda()));
    Eigen::VectorXd z(s.dim());
    for (int k = 0; k < s.lambda(); ++k) {
        for (int i = 0; i < s.dim(); ++i)
            z[i] = rng.gaussian();
        out.push_back(s.mean + s.sigma * (s.basis * s.scales.cwiseProduct(z)));
    }
    return out;
}

/// Recombination weight per input position: the candidate sorted at rank r gets weights[r],
/// and candidates with equal keys share the mean weight of their ranks.
inline std::vector<double> rank_weights(const CmaParameters& p, const std::vector<double>& keys, std::vector<std::size_t>& order)
{
    order.resize(keys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
    std::vector<double> w(keys.size(), 0.0);
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start + 1;
        while (end < order.size() && keys[order[end]] == keys[order[start]])
            ++end;
        double sum = 0.0;
        for (std::size_t r = start; r < end; ++r)
            sum += p.weights[static_cast<Eigen::Index>(r)];
        for (std::size_t r = start; r < end; ++r)
            w[order[r]] = sum / static_cast<double>(end - start);
        start = end;
    }
    return w;
}

/// One CMA-ES update from lambda candidates and their rank keys (higher key = better).
inline void cma_tell(EmitterState& s, const std::vector<std::pair<Eigen::VectorXd, double>>& ranked)
{
    const CmaParameters& p = s.params;
    if (static_cast<int>(ranked.size()) != p.lambda)
        throw CmaError("cma_tell needs exactly lambda candidates");
    if (!s.decomposed)
        s.decompose();

    std::vector<double> keys;
    keys.reserve(ranked.size());
    for (const auto& r : ranked)
        keys.push_back(r.second);
    std::vector<std::size_t> order;
    const std::vector<double> w = rank_weights(p, keys, order);

    const int n = s.dim();
    const Eigen::VectorXd old_mean = s.mean;
    Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < ranked.size(); ++i)
        if (w[i] != 0.0)
            new_mean += w[i] * ranked[i].first;

    const Eigen::VectorXd y_w = (new_mean - old_mean) / s.sigma;
    const Eigen::MatrixXd inv_sqrt = s.basis * s.scales.cwiseInverse().asDiagonal() * s.basis.transpose();

    Eigen::VectorXd ps = (1.0 - p.cs) * s.path_sigma + std::sqrt(p.cs * (2.0 - p.cs) * p.mueff) * (inv_sqrt * y_w);
    const double ps_norm = ps.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - p.cs, 2.0 * static_cast<double>(s.generation + 1)));
    const bool hsig = ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * p.chi_n;

    Eigen::VectorXd pc = (1.0 - p.cc) * s.path_c;
    if (hsig)
        pc += std::sqrt(p.cc * (2.0 - p.cc) * p.mueff) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (w[i] == 0.0)
            continue;
        const Eigen::VectorXd y = (ranked[i].first - old_mean) / s.sigma;
        rank_mu.noalias() += w[i] * (y * y.transpose());
    }
    const double delta_h = hsig ? 0.0 : p.cc * (2.0 - p.cc);
    Eigen::MatrixXd cov = (1.0 - p.c1 - p.cmu) * s.cov + p.c1 * (pc * pc.transpose() + delta_h * s.cov) + p.cmu * rank_mu;
    cov = 0.5 * (cov + cov.transpose());

    const double sigma = s.sigma * std::exp((p.cs / p.ds) * (ps_norm / p.chi_n - 1.0));

    if (!new_mean.allFinite() || !cov.allFinite() || !ps.allFinite() || !pc.allFinite() || !std::isfinite(sigma) || !(sigma > 0.0))
        throw NonFiniteUpdate();

    s.mean = std::move(new_mean);
    s.path_sigma = std::move(ps);
    s.path_c = std::move(pc);
    s.cov = std::move(cov);
    s.sigma = sigma;
    s.decomposed = false;
    ++s.generation;
}

} // namespace lsi
