#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qfit/tape.hpp"
#include "qfit/volume.hpp"

namespace qfit {

struct ParamDef {
    std::string name;
    double lb;
    double ub;
    double init;  // default starting value
};

// A forward model maps per-sample parameter columns plus an acquisition
// protocol to a predicted [n_samples x n_meas] signal matrix, expressed in
// tape ops so both solvers can reuse it.
struct Model {
    std::string name;
    std::vector<ParamDef> params;
    std::vector<std::string> protocol_axes;
    std::function<Var(Tape&, const std::vector<Var>&, const Protocol&)> forward;

    int n_meas(const Protocol& prot) const;
    void check_protocol(const Protocol& prot) const;

    // Convenience: value-only evaluation of the forward model.
    Matrix predict(const std::vector<std::vector<double>>& fields, const Protocol& prot) const;
};

const Model& get_model(const std::string& name);
std::vector<std::string> model_names();

// Lift a protocol axis as a constant tape node.
Var lift_axis(Tape& t, const Protocol& prot, const std::string& name);

}  // namespace qfit
