#include "msrt/riskmeasure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "msrt/common.hpp"

namespace msrt {

RiskMeasure RiskMeasure::expectation() { return RiskMeasure{Kind::Expectation, 0, 0.5, nullptr, nullptr}; }

RiskMeasure RiskMeasure::avar(double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw InvalidArgument("avar: alpha must be in [0,1]");
    return RiskMeasure{Kind::AVaR, alpha, 0.5, nullptr, nullptr};
}

RiskMeasure RiskMeasure::worst() { return RiskMeasure{Kind::Worst, 1.0, 0.5, nullptr, nullptr}; }

RiskMeasure RiskMeasure::combo(double lambda, RiskMeasure a, RiskMeasure b) {
    if (lambda < 0.0 || lambda > 1.0) throw InvalidArgument("combo: lambda must be in [0,1]");
    RiskMeasure rm;
    rm.kind = Kind::Combo;
    rm.lambda = lambda;
    rm.first = std::make_shared<RiskMeasure>(std::move(a));
    rm.second = std::make_shared<RiskMeasure>(std::move(b));
    return rm;
}

namespace {

RiskMeasure parse_atom(const std::string& s) {
    if (s == "E" || s == "e") return RiskMeasure::expectation();
    if (s == "worst" || s == "W" || s == "w") return RiskMeasure::worst();
    if (s.rfind("avar:", 0) == 0) {
        const std::string num = s.substr(5);
        try {
            return RiskMeasure::avar(std::stod(num));
        } catch (const std::exception&) {
            throw InvalidArgument("cannot parse AV@R level in '" + s + "'");
        }
    }
    throw InvalidArgument("unknown risk measure '" + s + "'");
}

}  // namespace

RiskMeasure RiskMeasure::parse(const std::string& text) {
    const auto plus = text.find('+');
    if (plus == std::string::npos) return parse_atom(text);
    return combo(0.5, parse_atom(text.substr(0, plus)), parse_atom(text.substr(plus + 1)));
}

std::string RiskMeasure::str() const {
    switch (kind) {
        case Kind::Expectation: return "E";
        case Kind::Worst: return "worst";
        case Kind::AVaR: {
            std::ostringstream os;
            os << "avar:" << alpha;
            return os.str();
        }
        case Kind::Combo:
            return first->str() + "+" + second->str();
    }
    return "?";
}

bool RiskMeasure::risk_neutral() const {
    switch (kind) {
        case Kind::Expectation: return true;
        case Kind::AVaR: return alpha <= 0.0;
        case Kind::Worst: return false;
        case Kind::Combo: return first->risk_neutral() && second->risk_neutral();
    }
    return false;
}

namespace {

void validate(const std::vector<double>& costs, const std::vector<double>& probs) {
    if (costs.empty() || costs.size() != probs.size())
        throw InvalidArgument("risk measure: costs/probs size mismatch");
    double s = 0.0;
    for (double q : probs) {
        if (q < 0.0) throw InvalidArgument("risk measure: negative probability");
        s += q;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("risk measure: probabilities must sum to 1");
    for (double z : costs)
        if (!std::isfinite(z)) throw InvalidArgument("risk measure: non-finite cost");
}

double expectation_of(const std::vector<double>& z, const std::vector<double>& q) {
    double s = 0.0;
    for (size_t i = 0; i < z.size(); ++i) s += q[i] * z[i];
    return s;
}

double worst_of(const std::vector<double>& z, const std::vector<double>& q) {
    double best = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < z.size(); ++i)
        if (q[i] > 0.0) best = std::max(best, z[i]);
    return best;
}

// Rockafellar-Uryasev form, minimized over the candidate set {z_p}: the
// piecewise-linear objective attains its minimum at an atom.
double avar_of(double alpha, const std::vector<double>& z, const std::vector<double>& q) {
    if (alpha <= 0.0) return expectation_of(z, q);
    if (alpha >= 1.0) return worst_of(z, q);
    const double beta = 1.0 - alpha;
    double best = std::numeric_limits<double>::infinity();
    for (double zeta : z) {
        double tail = 0.0;
        for (size_t i = 0; i < z.size(); ++i) tail += q[i] * std::max(0.0, z[i] - zeta);
        best = std::min(best, zeta + tail / beta);
    }
    return best;
}

/// alpha-quantile of the discrete distribution: inf{ z : P(Z <= z) >= alpha }.
double var_of(double alpha, const std::vector<double>& z, const std::vector<double>& q) {
    std::vector<size_t> order(z.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (z[a] != z[b]) return z[a] < z[b];
        return a < b;
    });
    double acc = 0.0;
    for (size_t k : order) {
        acc += q[k];
        if (acc >= alpha - 1e-15) return z[k];
    }
    return z[order.back()];
}

}  // namespace

double evaluate(const RiskMeasure& rm, const std::vector<double>& costs,
                const std::vector<double>& probs) {
    validate(costs, probs);
    switch (rm.kind) {
        case RiskMeasure::Kind::Expectation: return expectation_of(costs, probs);
        case RiskMeasure::Kind::Worst: return worst_of(costs, probs);
        case RiskMeasure::Kind::AVaR: return avar_of(rm.alpha, costs, probs);
        case RiskMeasure::Kind::Combo:
            return rm.lambda * evaluate(*rm.first, costs, probs) +
                   (1.0 - rm.lambda) * evaluate(*rm.second, costs, probs);
    }
    throw StateError("evaluate: bad risk measure kind");
}

std::vector<double> risk_adjusted_probs(const RiskMeasure& rm, const std::vector<double>& costs,
                                        const std::vector<double>& probs) {
    validate(costs, probs);
    const size_t n = costs.size();
    switch (rm.kind) {
        case RiskMeasure::Kind::Expectation:
            return probs;
        case RiskMeasure::Kind::Worst: {
            const double zmax = worst_of(costs, probs);
            std::vector<double> mu(n, 0.0);
            size_t count = 0;
            for (size_t i = 0; i < n; ++i)
                if (probs[i] > 0.0 && costs[i] == zmax) ++count;
            for (size_t i = 0; i < n; ++i)
                if (probs[i] > 0.0 && costs[i] == zmax) mu[i] = 1.0 / static_cast<double>(count);
            return mu;
        }
        case RiskMeasure::Kind::AVaR: {
            if (rm.alpha <= 0.0) return probs;
            if (rm.alpha >= 1.0)
                return risk_adjusted_probs(RiskMeasure::worst(), costs, probs);
            const double beta = 1.0 - rm.alpha;
            const double zeta = var_of(rm.alpha, costs, probs);
            std::vector<double> mu(n, 0.0);
            double assigned = 0.0;
            for (size_t i = 0; i < n; ++i) {
                if (costs[i] > zeta) {
                    mu[i] = probs[i] / beta;
                    assigned += mu[i];
                }
            }
            // remainder goes to the lowest-index atom at the V@R value
            for (size_t i = 0; i < n; ++i) {
                if (costs[i] == zeta) {
                    mu[i] = 1.0 - assigned;
                    break;
                }
            }
            return mu;
        }
        case RiskMeasure::Kind::Combo: {
            auto a = risk_adjusted_probs(*rm.first, costs, probs);
            auto b = risk_adjusted_probs(*rm.second, costs, probs);
            std::vector<double> mu(n);
            for (size_t i = 0; i < n; ++i) mu[i] = rm.lambda * a[i] + (1.0 - rm.lambda) * b[i];
            return mu;
        }
    }
    throw StateError("risk_adjusted_probs: bad risk measure kind");
}

}  // namespace msrt
