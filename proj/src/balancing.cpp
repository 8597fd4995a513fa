#include "iit/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iit/errors.hpp"

namespace iit {

BalancingFunction BalancingFunction::hc(double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("HC balancing function needs a finite c >= 0");
    return BalancingFunction(BalancingKind::HC, c);
}

double BalancingFunction::log_apply(double log_r) const {
    if (!std::isfinite(log_r)) throw std::invalid_argument("balancing function applied to a non-finite log ratio");
    switch (kind_) {
        case BalancingKind::MinOne:
            return std::min(0.0, log_r);
        case BalancingKind::Sqrt:
            return 0.5 * log_r;
        case BalancingKind::Barker:
            // log(r / (1 + r)) = -log(1 + e^{-t})
            return log_r > 0.0 ? -std::log1p(std::exp(-log_r)) : log_r - std::log1p(std::exp(log_r));
        case BalancingKind::MaxOne:
            return std::max(0.0, log_r);
        case BalancingKind::HC:
            return std::max(std::min(0.0, log_r - c_), std::min(log_r, -c_));
    }
    return 0.0;
}

std::string BalancingFunction::name() const {
    switch (kind_) {
        case BalancingKind::MinOne: return "min1";
        case BalancingKind::Sqrt: return "sqrt";
        case BalancingKind::Barker: return "barker";
        case BalancingKind::MaxOne: return "max1";
        case BalancingKind::HC: {
            std::string s = std::to_string(c_);
            s.erase(s.find_last_not_of('0') + 1);
            if (!s.empty() && s.back() == '.') s.pop_back();
            return "hc:" + s;
        }
    }
    return "?";
}

BalancingFunction BalancingFunction::parse(const std::string& text) {
    if (text == "min1" || text == "minone") return min_one();
    if (text == "sqrt") return sqrt();
    if (text == "barker") return barker();
    if (text == "max1" || text == "maxone") return max_one();
    if (text.rfind("hc:", 0) == 0) {
        std::size_t used = 0;
        const std::string tail = text.substr(3);
        double c = 0.0;
        try {
            c = std::stod(tail, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tail.size()) throw ConfigError("bad HC parameter in balancing function '" + text + "'");
        return hc(c);
    }
    throw ConfigError("unknown balancing function '" + text + "' (expected min1, sqrt, barker, max1 or hc:<c>)");
}

double apply_balancing(const BalancingFunction& h, double log_r) { return h.log_apply(log_r); }

}  // namespace iit
