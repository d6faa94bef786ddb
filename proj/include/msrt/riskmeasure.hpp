#pragma once

#include <memory>
#include <string>
#include <vector>

namespace msrt {

/// One of the five risk measures of the planning model: expectation, AV@R,
/// worst case, or a two-way convex combination. The AV@R parameter follows
/// the tail-confidence convention: alpha -> 1 recovers the worst case,
/// alpha = 0 the expectation.
struct RiskMeasure {
    enum class Kind { Expectation, AVaR, Worst, Combo };

    Kind kind = Kind::Expectation;
    double alpha = 0.0;   // AVaR tail-confidence level
    double lambda = 0.5;  // Combo weight on the first component
    std::shared_ptr<RiskMeasure> first, second;

    static RiskMeasure expectation();
    static RiskMeasure avar(double alpha);
    static RiskMeasure worst();
    static RiskMeasure combo(double lambda, RiskMeasure a, RiskMeasure b);

    /// Parses the CLI selector strings: "E", "avar:0.8", "worst",
    /// "E+avar:0.8", "E+worst". A+B means 0.5*A + 0.5*B.
    static RiskMeasure parse(const std::string& text);
    std::string str() const;

    bool risk_neutral() const;
};

/// rho(Z) for a finite distribution of costs.
double evaluate(const RiskMeasure& rm, const std::vector<double>& costs,
                const std::vector<double>& probs);

/// Maximizing measure of the dual representation: sum(mu * Z) equals
/// evaluate(rm, Z, q) and sum(mu) = 1. Ties are resolved deterministically
/// (uniform split over the argmax for the worst case; lowest index for the
/// V@R atom).
std::vector<double> risk_adjusted_probs(const RiskMeasure& rm, const std::vector<double>& costs,
                                        const std::vector<double>& probs);

}  // namespace msrt
