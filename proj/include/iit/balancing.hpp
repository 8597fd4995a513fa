#pragma once

#include <string>

namespace iit {

enum class BalancingKind { MinOne, Sqrt, Barker, MaxOne, HC };

// A balancing function h with h(r) = r h(1/r), evaluated on log ratios.
class BalancingFunction {
public:
    constexpr BalancingFunction() = default;

    static constexpr BalancingFunction min_one() { return BalancingFunction(BalancingKind::MinOne, 0.0); }
    static constexpr BalancingFunction sqrt() { return BalancingFunction(BalancingKind::Sqrt, 0.0); }
    static constexpr BalancingFunction barker() { return BalancingFunction(BalancingKind::Barker, 0.0); }
    static constexpr BalancingFunction max_one() { return BalancingFunction(BalancingKind::MaxOne, 0.0); }
    // (1 ∧ r e^{-c}) ∨ (r ∧ e^{-c}); c = 0 gives min_one.
    static BalancingFunction hc(double c);

    constexpr BalancingKind kind() const { return kind_; }
    constexpr double c() const { return c_; }

    // True when h(r) <= 1 for every r, which Metropolis-type acceptance requires.
    constexpr bool bounded() const {
        return kind_ == BalancingKind::MinOne || kind_ == BalancingKind::Barker || kind_ == BalancingKind::HC;
    }

    // log h(e^{log_r}).
    double log_apply(double log_r) const;

    std::string name() const;
    static BalancingFunction parse(const std::string& text);

    friend constexpr bool operator==(const BalancingFunction&, const BalancingFunction&) = default;

private:
    constexpr BalancingFunction(BalancingKind kind, double c) : kind_(kind), c_(c) {}

    BalancingKind kind_ = BalancingKind::MinOne;
    double c_ = 0.0;
};

// Free-function form of BalancingFunction::log_apply.
double apply_balancing(const BalancingFunction& h, double log_r);

}  // namespace iit
