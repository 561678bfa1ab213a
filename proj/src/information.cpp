#include "rayleigh/information.hpp"

#include "rayleigh/errors.hpp"
#include "rayleigh/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <cmath>

namespace rayleigh {

ClassicalFisher classicalFisher(const ProbabilityVector &p, double photons, const FisherOptions &options) {
    if(!(photons > 0.0)) throw ValidationError(fmt::format("photon budget must be positive, got {}", photons));
    const std::size_t R = p.derivatives.size();
    const RVector     values = p.allValues();
    std::vector<RVector> slopes;
    for(std::size_t mu = 0; mu < R; ++mu) slopes.push_back(p.allDerivatives(mu));

    ClassicalFisher out;
    out.matrix = RMatrix::Zero(static_cast<Index>(R), static_cast<Index>(R));
    RVector d(static_cast<Index>(R));
    for(Index j = 0; j < values.size(); ++j) {
        double pj = values[j];
        if(pj < 0.0) {
            if(pj < -1e-12) throw ValidationError(fmt::format("negative probability {:.3e} at outcome {}", pj, j));
            pj = 0.0;
        }
        out.smallestProbability = std::min(out.smallestProbability, pj);
        for(std::size_t mu = 0; mu < R; ++mu) d[static_cast<Index>(mu)] = slopes[mu][j];
        if(pj < options.probabilityFloor) {
            if(R == 0 || d.cwiseAbs().maxCoeff() <= options.derivativeFloor)
                ++out.negligibleTerms;
            else
                ++out.flaggedTerms;
            continue;
        }
        out.matrix.noalias() += d * d.transpose() / pj;
    }
    out.matrix *= photons;
    return out;
}

namespace {

struct Eigenbasis {
    RVector lambda;
    CMatrix vectors;
    double  trace = 0.0;
};

Eigenbasis diagonalize(const CMatrix &g, const SldOptions &options) {
    if(g.rows() != g.cols() || g.rows() == 0) throw ValidationError("correlation matrix must be square and non-empty");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
    if(es.info() != Eigen::Success) throw Error("eigendecomposition of the correlation matrix failed");
    Eigenbasis e{es.eigenvalues(), es.eigenvectors(), g.trace().real()};
    for(auto &l : e.lambda)
        if(l < options.rankFloor) l = 0.0;
    return e;
}

SldSolution solveIn(const Eigenbasis &e, const CMatrix &dg, const SldOptions &options) {
    const Index D = e.vectors.rows();
    if(dg.rows() != D || dg.cols() != D) throw ValidationError("derivative and correlation matrix dimensions differ");
    const CMatrix h     = e.vectors.adjoint() * dg * e.vectors;
    const double  floor = options.pairFloor * e.trace;

    SldSolution out;
    CMatrix     local = CMatrix::Zero(D, D);
    for(Index a = 0; a < D; ++a) {
        for(Index b = 0; b < D; ++b) {
            const double s = e.lambda[a] + e.lambda[b];
            if(s > floor) {
                local(a, b) = 2.0 * h(a, b) / s;
                continue;
            }
            if(std::abs(h(a, b)) > options.supportTolerance)
                throw SupportViolation(fmt::format("derivative leaves the support of g: |dg_ab| = {:.3e} on a null eigenpair", std::abs(h(a, b))));
            ++out.droppedPairs;
        }
    }
    CMatrix l = e.vectors * local * e.vectors.adjoint();
    out.sld   = 0.5 * (l + l.adjoint());
    return out;
}

} // namespace

SldSolution sldSolve(const CMatrix &g, const CMatrix &dg, const SldOptions &options) {
    return solveIn(diagonalize(g, options), dg, options);
}

HelstromFisher helstromFisher(const CorrelationMatrix &g, const CorrelationDerivatives &dg, double photons, const SldOptions &options) {
    if(!(photons > 0.0)) throw ValidationError(fmt::format("photon budget must be positive, got {}", photons));
    const Eigenbasis     e = diagonalize(g.entries, options);
    const Index          R = static_cast<Index>(dg.size());
    std::vector<CMatrix> slds;
    HelstromFisher       out;
    for(const auto &m : dg.perParameter) {
        auto s = solveIn(e, m, options);
        out.droppedPairs += s.droppedPairs;
        slds.push_back(std::move(s.sld));
    }
    out.matrix = RMatrix::Zero(R, R);
    for(Index mu = 0; mu < R; ++mu)
        for(Index nu = 0; nu < R; ++nu)
            out.matrix(mu, nu) = photons * (slds[static_cast<std::size_t>(mu)] * slds[static_cast<std::size_t>(nu)] * g.entries).trace().real();
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
    return out;
}

double continuumDirectFisher(const SceneModel &scene, const DirectQuadrature &quadrature) {
    scene.validate();
    const auto  &psf = scene.psf;
    const double x1  = scene.firstSource();
    const double x2  = scene.secondSource();
    auto integrand = [&](double x) {
        const double a1 = psf.amplitude(x - x1), a2 = psf.amplitude(x - x2);
        const double level = 0.5 * (a1 * a1 + a2 * a2);
        if(!(level > 0.0)) return 0.0;
        // d/dtheta2 of the normalized intensity
        const double slope = 0.5 * (a1 * psf.slope(x - x1) - a2 * psf.slope(x - x2));
        return slope * slope / level;
    };
    const double reach = quadrature.halfWidth * psf.width();
    const auto   r     = refineSimpson(integrand, x1 - reach, x2 + reach, quadrature.relativeTolerance, quadrature.maxLevels);
    if(!r.converged)
        throw QuadratureError(fmt::format("direct-imaging quadrature did not converge after {} refinements", quadrature.maxLevels));
    return scene.photons() * r.value;
}

RMatrix crb(const RMatrix &information, double maxCondition) {
    if(information.rows() != information.cols() || information.rows() == 0) throw ValidationError("information matrix must be square");
    const RMatrix sym = 0.5 * (information + information.transpose());
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sym);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    if(!(lo > 0.0) || hi / lo >= maxCondition)
        throw SingularMatrixError(fmt::format("information matrix is singular (eigenvalues in [{:.3e}, {:.3e}])", lo, hi));
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

double crbScalar(double information) {
    if(!(information > 0.0)) throw SingularMatrixError(fmt::format("information {:.3e} is not positive", information));
    return 1.0 / information;
}

double InformationResult::dominanceExcess() const {
    const RMatrix diff = 0.5 * ((J - K) + (J - K).transpose());
    Eigen::SelfAdjointEigenSolver<RMatrix> ed(diff);
    Eigen::SelfAdjointEigenSolver<RMatrix> ek(0.5 * (K + K.transpose()));
    const double norm = ek.eigenvalues().cwiseAbs().maxCoeff();
    const double top  = ed.eigenvalues().maxCoeff();
    return norm > 0.0 ? top / norm : top;
}

InformationResult analyze(const MeasurementScheme &scheme, const SceneModel &scene, const AnalysisOptions &options) {
    const Index D      = scheme.basis.dimension;
    const double c     = scheme.basis.center;
    const auto  g      = buildCorrelation(scene, D, c, options.correlation);
    const auto  dg     = buildDerivatives(scene, D, c, options.derivatives, options.correlation);
    const auto  p      = probabilities(scheme, g, dg);
    const auto  fisher = classicalFisher(p, scene.photons(), options.fisher);
    const auto  hf     = helstromFisher(g, dg, scene.photons(), options.sld);

    InformationResult out;
    out.J                   = fisher.matrix;
    out.K                   = hf.matrix;
    out.flaggedTerms        = fisher.flaggedTerms;
    out.smallestProbability = fisher.smallestProbability;
    out.droppedPairs        = hf.droppedPairs;
    out.leakage             = g.leakage;
    try {
        out.crbJ = crb(out.J);
    } catch(const SingularMatrixError &) {
    }
    try {
        out.crbK = crb(out.K);
    } catch(const SingularMatrixError &) {
    }
    return out;
}

} // namespace rayleigh
