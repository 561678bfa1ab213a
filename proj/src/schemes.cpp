#include "rayleigh/schemes.hpp"

#include "rayleigh/errors.hpp"
#include "rayleigh/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

namespace rayleigh {

namespace {

constexpr double kNegativeClamp = 1e-12;

CMatrix residualOf(const std::vector<CMatrix> &parts, Index dimension) {
    CMatrix res = CMatrix::Identity(dimension, dimension);
    for(const auto &p : parts) res -= p;
    return res;
}

// int_a^b phi_m phi_n dx for all m, n, by composite Gauss-Legendre.
RMatrix pixelOverlap(const ModeBasis &basis, double a, double b) {
    using Rule       = boost::math::quadrature::gauss<double, 10>;
    const auto &xs   = Rule::abscissa();
    const auto &ws   = Rule::weights();
    const int   panels = std::max(1, static_cast<int>(std::ceil((b - a) / (0.05 * basis.width))));
    const double h     = (b - a) / panels;
    const Index  D     = basis.dimension;

    RMatrix out = RMatrix::Zero(D, D);
    RVector phi(D);
    auto    accumulate = [&](double x, double w) {
        basis.evaluate(x, std::span<double>(phi.data(), static_cast<std::size_t>(D)));
        out.selfadjointView<Eigen::Lower>().rankUpdate(phi, w);
    };
    for(int k = 0; k < panels; ++k) {
        const double mid  = a + (k + 0.5) * h;
        const double half = 0.5 * h;
        for(std::size_t i = 0; i < xs.size(); ++i) {
            if(xs[i] == 0.0) {
                accumulate(mid, ws[i] * half);
            } else {
                accumulate(mid - half * xs[i], ws[i] * half);
                accumulate(mid + half * xs[i], ws[i] * half);
            }
        }
    }
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

} // namespace

std::string kindName(MeasurementScheme::Kind kind) {
    switch(kind) {
        case MeasurementScheme::Kind::directImaging: return "direct-imaging";
        case MeasurementScheme::Kind::hgSpade: return "hg-spade";
        case MeasurementScheme::Kind::binarySpade: return "binary-spade";
        case MeasurementScheme::Kind::customUnitary: return "custom-unitary";
    }
    return "unknown";
}

PixelGrid PixelGrid::uniform(double width, double extent, double center) {
    if(!(width > 0.0) || !std::isfinite(width)) throw ValidationError(fmt::format("pixel width must be positive, got {}", width));
    if(!(extent > 0.0) || !std::isfinite(extent)) throw ValidationError(fmt::format("pixel extent must be positive, got {}", extent));
    const double count = 2.0 * extent / width;
    const auto   n     = static_cast<std::size_t>(std::llround(count));
    if(n == 0 || std::abs(count - static_cast<double>(n)) > 1e-9 * count)
        throw ValidationError(fmt::format("pixel width {} does not tile [-{}, {}] exactly", width, extent, extent));
    PixelGrid grid;
    grid.edges.resize(n + 1);
    for(std::size_t k = 0; k <= n; ++k) grid.edges[k] = center - extent + static_cast<double>(k) * width;
    grid.edges.back() = center + extent;
    return grid;
}

PixelGrid PixelGrid::fromEdges(std::vector<double> edges) {
    if(edges.size() < 2) throw ValidationError("pixel grid needs at least two edges");
    for(std::size_t k = 0; k < edges.size(); ++k) {
        if(!std::isfinite(edges[k])) throw ValidationError("pixel edges must be finite");
        if(k > 0 && !(edges[k] > edges[k - 1]))
            throw ValidationError(fmt::format("pixels overlap: edge {} ({}) does not exceed edge {} ({})", k, edges[k], k - 1, edges[k - 1]));
    }
    return PixelGrid{std::move(edges)};
}

MeasurementScheme makeDirectImaging(const PixelGrid &grid, const ModeBasis &basis) {
    const PixelGrid   checked = PixelGrid::fromEdges(grid.edges);
    MeasurementScheme s;
    s.kind   = MeasurementScheme::Kind::directImaging;
    s.basis  = basis;
    s.pixels = checked;
    for(std::size_t k = 0; k < checked.size(); ++k) {
        s.elements.push_back(pixelOverlap(basis, checked.edges[k], checked.edges[k + 1]).cast<Complex>());
        s.labels.push_back(fmt::format("pixel({:.10g}:{:.10g})", checked.edges[k], checked.edges[k + 1]));
    }
    s.elements.push_back(residualOf(s.elements, basis.dimension));
    s.labels.emplace_back("residual");
    s.residualIndex = s.elements.size() - 1;
    return s;
}

RMatrix displacedModeOverlaps(const ModeBasis &basis, double offset, Index count) {
    const Index D = basis.dimension;
    // phi_m(x) phi_q(x - d) = poly * exp(-(x - d/2)^2 / (2 w^2)) * exp(-d^2 / (8 w^2));
    // substitute x = d/2 + sqrt(2) w t to get the Hermite weight.
    const int       n     = static_cast<int>((D + count) / 2 + 16);
    const auto      rule  = gaussHermite(n);
    const double    scale = std::numbers::sqrt2 * basis.width;
    const ModeBasis local{basis.width, 0.0, std::max(D, count)};

    RMatrix out = RMatrix::Zero(D, count);
    RVector a(local.dimension), b(local.dimension);
    for(int i = 0; i < n; ++i) {
        const double t = rule.nodes[static_cast<std::size_t>(i)];
        const double x = 0.5 * offset + scale * t;
        const double w = rule.weights[static_cast<std::size_t>(i)] * std::exp(t * t) * scale;
        local.evaluate(x, std::span<double>(a.data(), static_cast<std::size_t>(a.size())));
        local.evaluate(x - offset, std::span<double>(b.data(), static_cast<std::size_t>(b.size())));
        out.noalias() += w * a.head(D) * b.head(count).transpose();
    }
    return out;
}

MeasurementScheme makeHgSpade(Index qMax, double offset, const ModeBasis &basis) {
    if(qMax < 1 || qMax > basis.dimension)
        throw ValidationError(fmt::format("SPADE mode count {} must lie in [1, D = {}]", qMax, basis.dimension));
    if(!std::isfinite(offset)) throw ValidationError("SPADE offset must be finite");
    const RMatrix     u = displacedModeOverlaps(basis, offset, qMax);
    MeasurementScheme s;
    s.kind   = MeasurementScheme::Kind::hgSpade;
    s.basis  = basis;
    s.modes  = qMax;
    s.offset = offset;
    for(Index q = 0; q < qMax; ++q) {
        s.elements.push_back((u.col(q) * u.col(q).transpose()).cast<Complex>());
        s.labels.push_back(fmt::format("mode_{}", q));
    }
    s.elements.push_back(residualOf(s.elements, basis.dimension));
    s.labels.emplace_back("residual");
    s.residualIndex = s.elements.size() - 1;
    return s;
}

MeasurementScheme makeBinarySpade(double offset, const ModeBasis &basis) {
    MeasurementScheme s = makeHgSpade(1, offset, basis);
    s.kind              = MeasurementScheme::Kind::binarySpade;
    s.labels.back()     = "rest";
    return s;
}

MeasurementScheme makeCustomUnitary(const CMatrix &unitary, const ModeBasis &basis) {
    const Index D = basis.dimension;
    if(unitary.rows() != D || unitary.cols() != D)
        throw ValidationError(fmt::format("unitary is {}x{}, basis dimension is {}", unitary.rows(), unitary.cols(), D));
    const double defect = (unitary.adjoint() * unitary - CMatrix::Identity(D, D)).cwiseAbs().maxCoeff();
    if(!(defect < 1e-10)) throw ValidationError(fmt::format("scattering matrix is not unitary: max|F^H F - I| = {:.3e}", defect));

    MeasurementScheme s;
    s.kind    = MeasurementScheme::Kind::customUnitary;
    s.basis   = basis;
    s.unitary = unitary;
    for(Index j = 0; j < D; ++j) {
        // Pi_j = F^H e_j e_j^H F
        s.elements.push_back(unitary.row(j).adjoint() * unitary.row(j));
        s.labels.push_back(fmt::format("output_{}", j));
    }
    s.elements.push_back(CMatrix::Zero(D, D));
    s.labels.emplace_back("residual");
    s.residualIndex = s.elements.size() - 1;
    return s;
}

CMatrix loadUnitaryCsv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if(!in) throw ValidationError(fmt::format("cannot open unitary file '{}'", path.string()));
    std::vector<std::vector<double>> rows;
    std::string                      line;
    int                              lineNo = 0;
    while(std::getline(in, line)) {
        ++lineNo;
        if(!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if(first == std::string::npos || line[first] == '#') continue;
        std::vector<double> row;
        std::size_t         pos = 0;
        while(pos <= line.size()) {
            const auto  comma = std::min(line.find(',', pos), line.size());
            std::string cell  = line.substr(pos, comma - pos);
            const auto  b     = cell.find_first_not_of(" \t");
            const auto  e     = cell.find_last_not_of(" \t");
            cell              = b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1);
            double v          = 0.0;
            auto [ptr, ec]    = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if(cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
                throw ValidationError(fmt::format("{}:{}: cannot parse '{}' as a number", path.string(), lineNo, cell));
            row.push_back(v);
            pos = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    const auto D = static_cast<Index>(rows.size());
    if(D == 0) throw ValidationError(fmt::format("unitary file '{}' is empty", path.string()));
    CMatrix F(D, D);
    for(Index r = 0; r < D; ++r) {
        const auto &row = rows[static_cast<std::size_t>(r)];
        if(static_cast<Index>(row.size()) != 2 * D)
            throw ValidationError(fmt::format("unitary file '{}': row {} has {} columns, expected {}", path.string(), r, row.size(), 2 * D));
        for(Index c = 0; c < D; ++c) F(r, c) = Complex(row[static_cast<std::size_t>(2 * c)], row[static_cast<std::size_t>(2 * c + 1)]);
    }
    return F;
}

RVector ProbabilityVector::allValues() const {
    RVector out(values.size() + 1);
    out << values, residualMass;
    return out;
}

RVector ProbabilityVector::allDerivatives(std::size_t parameter) const {
    RVector out(values.size() + 1);
    out << derivatives.at(parameter), residualDerivatives[static_cast<Index>(parameter)];
    return out;
}

ProbabilityVector probabilities(const MeasurementScheme &scheme, const CorrelationMatrix &g, const CorrelationDerivatives &dg) {
    const Index D = scheme.basis.dimension;
    if(g.dimension() != D) throw ValidationError(fmt::format("dimension mismatch: scheme D = {}, correlation D = {}", D, g.dimension()));
    if(std::abs(g.basis.width - scheme.basis.width) > 1e-12 * scheme.basis.width ||
       std::abs(g.basis.center - scheme.basis.center) > 1e-12 * scheme.basis.width)
        throw ValidationError("correlation matrix and scheme use different mode bases");
    for(const auto &m : dg.perParameter)
        if(m.rows() != D || m.cols() != D) throw ValidationError("dimension mismatch between scheme and correlation derivative");

    const std::size_t R = dg.perParameter.size();
    ProbabilityVector pv;
    pv.parameters = dg.parameters;
    pv.values.resize(static_cast<Index>(scheme.outcomeCount()));
    pv.derivatives.assign(R, RVector(static_cast<Index>(scheme.outcomeCount())));
    pv.residualDerivatives.resize(static_cast<Index>(R));

    Index slot = 0;
    for(std::size_t j = 0; j < scheme.elements.size(); ++j) {
        const CMatrix &pi = scheme.elements[j];
        double         p  = traceProductReal(pi, g.entries);
        if(p < 0.0) {
            if(p < -kNegativeClamp)
                throw ValidationError(fmt::format("negative probability {:.3e} for outcome '{}'", p, scheme.labels[j]));
            p = 0.0;
        }
        if(j == scheme.residualIndex) {
            pv.residualMass = p;
            for(std::size_t mu = 0; mu < R; ++mu) pv.residualDerivatives[static_cast<Index>(mu)] = traceProductReal(pi, dg.perParameter[mu]);
        } else {
            pv.values[slot] = p;
            for(std::size_t mu = 0; mu < R; ++mu) pv.derivatives[mu][slot] = traceProductReal(pi, dg.perParameter[mu]);
            ++slot;
        }
    }
    if(scheme.kind == MeasurementScheme::Kind::directImaging && pv.residualMass > 0.01)
        pv.warnings.push_back(fmt::format("{:.3g} of the light falls outside the pixel grid; widen the extent", pv.residualMass));
    return pv;
}

ProbabilityVector probabilities(const MeasurementScheme &scheme, const CorrelationMatrix &g) {
    return probabilities(scheme, g, CorrelationDerivatives{});
}

} // namespace rayleigh
