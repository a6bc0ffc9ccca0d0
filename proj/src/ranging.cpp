#include "crv/ranging.hpp"

#include <cmath>
#include <numbers>

namespace crv {

namespace {

void check_params(const RangingParams& params) {
    if (!params.valid()) {
        throw InvalidInput("ranging params require omega > 0, lambda > 0, l0 > 0");
    }
}

} // namespace

double reference_path_loss_db(const RangingParams& params) {
    check_params(params);
    return 20.0 * std::log10(4.0 * std::numbers::pi * params.reference_distance_m /
                             params.wavelength_m);
}

double path_loss_to_distance(double kappa_db, const RangingParams& params) {
    check_params(params);
    if (!std::isfinite(kappa_db)) {
        throw InvalidInput("path loss must be finite");
    }
    double exponent = (kappa_db - reference_path_loss_db(params)) / (10.0 * params.loss_exponent);
    return std::pow(10.0, exponent) * params.reference_distance_m;
}

double distance_to_path_loss(double distance_m, const RangingParams& params) {
    check_params(params);
    if (!(distance_m > 0.0) || !std::isfinite(distance_m)) {
        throw InvalidInput("distance must be positive and finite");
    }
    return 10.0 * params.loss_exponent * std::log10(distance_m / params.reference_distance_m) +
           reference_path_loss_db(params);
}

} // namespace crv
