#include "vidbias/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace vidbias {

std::vector<double> predict_probs(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("predict_probs: empty logits");
    double m = logits[0];
    for (const double v : logits) {
        if (!std::isfinite(v)) throw std::invalid_argument("predict_probs: non-finite logit");
        m = std::max(m, v);
    }
    std::vector<double> p(logits.size());
    double z = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

int argmax_lowest_tiebreak(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax: empty input");
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[static_cast<size_t>(i)] > values[static_cast<size_t>(best)]) best = i;
    return best;
}

}  // namespace vidbias
