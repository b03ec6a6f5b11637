#pragma once

#include <cstdint>

#include "qfit/model.hpp"
#include "qfit/volume.hpp"

namespace qfit {

enum class NoiseKind { gaussian, rician };

// Noiseless forward evaluation of a parameter set.
Matrix predict(const Model& model, const ParamSet& truth, const Protocol& prot);

// Adds noise at the requested SNR. The per-sample noise std is the S0 field
// if the model has one, otherwise |signal at the first measurement|,
// otherwise 1, divided by SNR. Rician: |S + sigma*(n1 + i*n2)|.
MeasuredData simulate(const Model& model, const ParamSet& truth, const Protocol& prot,
                      double snr, NoiseKind noise, uint64_t seed);

}  // namespace qfit
