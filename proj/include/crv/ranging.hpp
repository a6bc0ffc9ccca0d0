#pragma once

#include "crv/errors.hpp"

namespace crv {

/// Log-distance path-loss parameters used to turn a received path loss (dB)
/// into a distance estimate and back.
struct RangingParams {
    double loss_exponent = 2.0;        // omega
    double wavelength_m = 0.0508;      // 5.9 GHz carrier
    double reference_distance_m = 1.0; // l0

    bool valid() const {
        return loss_exponent > 0.0 && wavelength_m > 0.0 && reference_distance_m > 0.0;
    }
};

/// Path loss at the reference distance: 20*log10(4*pi*l0 / lambda).
double reference_path_loss_db(const RangingParams& params);

/// d = 10^((kappa - 20*log10(4*pi*l0/lambda)) / (10*omega)) * l0.
/// Strictly positive and strictly increasing in kappa.
double path_loss_to_distance(double kappa_db, const RangingParams& params);

/// Exact inverse of path_loss_to_distance; requires d > 0.
double distance_to_path_loss(double distance_m, const RangingParams& params);

} // namespace crv
