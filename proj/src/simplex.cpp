#include "mbsc/simplex.hpp"

#include <limits>

namespace mbsc {

void PgdConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidArgument("PgdConfig: learning_rate must be positive");
    }
    if (epochs < 1) {
        throw InvalidArgument("PgdConfig: epochs must be >= 1");
    }
    if (tolerance && !(*tolerance >= 0.0)) {
        throw InvalidArgument("PgdConfig: tolerance must be non-negative");
    }
    if (patience < 1) {
        throw InvalidArgument("PgdConfig: patience must be >= 1");
    }
    if (trace_every < 0) {
        throw InvalidArgument("PgdConfig: trace_every must be >= 0");
    }
}

namespace {

ObjectiveEval evaluate(const Objective& objective, const Weights& w, std::int64_t epoch) {
    ObjectiveEval e = objective(w);
    if (!std::isfinite(e.value)) {
        throw NumericalError("pgd_minimize: non-finite objective at epoch " + std::to_string(epoch));
    }
    if (e.subgradient.size() != w.size()) {
        throw InvalidArgument("pgd_minimize: subgradient has length " +
                              std::to_string(e.subgradient.size()) + ", expected " +
                              std::to_string(w.size()));
    }
    if (!e.subgradient.allFinite()) {
        throw NumericalError("pgd_minimize: non-finite subgradient at epoch " + std::to_string(epoch));
    }
    return e;
}

}  // namespace

PgdResult pgd_minimize(const Objective& objective, const Weights& w0, const PgdConfig& config) {
    config.validate();
    PgdResult result;
    Weights w = w0;

    if (w.size() == 1) {
        const ObjectiveEval e = evaluate(objective, w, 0);
        result.weights = w;
        result.best_weights = w;
        result.value = e.value;
        result.best_value = e.value;
        return result;
    }

    result.best_value = std::numeric_limits<double>::infinity();
    std::int64_t quiet = 0;
    std::int64_t epoch = 1;
    for (; epoch <= config.epochs; ++epoch) {
        const ObjectiveEval e = evaluate(objective, w, epoch);
        if (e.value < result.best_value) {
            result.best_value = e.value;
            result.best_weights = w;
        }
        if (config.trace_every > 0 && (epoch - 1) % config.trace_every == 0) {
            result.trace.push_back({epoch, e.value});
        }
        Weights next = project_simplex(w.values() - config.learning_rate * e.subgradient);
        const double change = (next.values() - w.values()).cwiseAbs().maxCoeff();
        w = std::move(next);
        if (config.tolerance) {
            quiet = change < *config.tolerance ? quiet + 1 : 0;
            if (quiet >= config.patience) {
                result.stopped_early = true;
                break;
            }
        }
    }
    result.epochs_run = std::min(epoch, config.epochs);

    const ObjectiveEval last = evaluate(objective, w, result.epochs_run);
    result.weights = w;
    result.value = last.value;
    if (last.value < result.best_value) {
        result.best_value = last.value;
        result.best_weights = w;
    }
    return result;
}

}  // namespace mbsc
