#pragma once

#include <string>
#include <vector>

#include "simrecon/diffcore/graph.hpp"
#include "simrecon/imgcore.hpp"

// Finite-difference verification of reverse-mode gradients, run on float64
// graphs. The loss is mean(output .* fixed random projection) so no gradient
// component can hide behind symmetry.

namespace simrecon::diff {

// compares backward() against central differences with step h for every
// coordinate of every listed leaf; returns the max relative error
// |analytic - fd| / max(|analytic|, |fd|, 1e-12).
double finite_difference_check(const Graph<double>& graph, int loss_node,
                               const std::vector<int>& leaves, Session<double>& session,
                               double h = 1e-4);

// Primitives the harness knows how to wrap in a tiny test graph.
enum class Primitive {
    Conv2d,
    Add,
    Mul,
    Relu,
    MaxPool2,
    Upsample2,
    ConcatC,
    PsfConv,
    BlockMean,
    MeanReduce,
    Ssim,
    TotalVar,
};

std::string primitive_name(Primitive p);
const std::vector<Primitive>& all_primitives();

// Builds leaf -> primitive -> projection -> mean on random inputs away from
// nonsmooth points (relu at 0, pool ties) and runs the check.
double grad_check(Primitive p, Seed seed, double h = 1e-4);

// Three randomly chosen chainable primitives composed end-to-end.
double grad_check_composition(Seed seed, double h = 1e-4);

} // namespace simrecon::diff
