#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "steam/attention.hpp"
#include "steam/graph.hpp"
#include "steam/tensor.hpp"

namespace steam::verify {

// Independent oracles for the acceptance suite. Nothing in this namespace
// shares code with the production attention/steam paths: everything is
// straight nested loops over plain tensors.

struct GradcheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::size_t worst_input = 0;
    std::int64_t worst_coord = -1;
    std::string summary() const;
};

// Central finite differences of a scalar-valued function against
// caller-supplied analytic gradients. Relative error uses the denominator
// floor max(|a|, |n|, 1e-8).
GradcheckReport gradcheck(
    const std::function<double(const std::vector<Tensor>&)>& fn,
    const std::function<std::vector<Tensor>(const std::vector<Tensor>&)>& analytic_grads,
    std::vector<Tensor> inputs, double step = 1e-5, double tol = 1e-4);

// Full N x N masked attention: logits everywhere, additive -1e30 outside
// (masked) neighborhoods, stabilized softmax, head average, multiply.
AttentionOutput dense_attention_oracle(const Tensor& x, const Graph& g,
                                       const EdgeDropMask* mask,
                                       const GraphAttentionParams& p,
                                       const AttentionOptions& opts = {});

// Nested-loop recomputation of CIA's channel scores (avg pooling path).
Tensor brute_force_cia(const Tensor& x, const Graph& g, const GraphAttentionParams& p,
                       const AttentionOptions& opts = {});

// Runs the oracle + gradcheck + invariant suite, printing one pass/fail
// line per check. Returns true when everything passed.
bool run_verification_suite(std::ostream& os);

}  // namespace steam::verify
