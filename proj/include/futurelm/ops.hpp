#pragma once

#include <span>
#include <vector>

#include "futurelm/rng.hpp"
#include "futurelm/tape.hpp"

// Differentiable operations on tape variables. Every op checks shapes and
// throws DimensionError naming the offending shapes.
namespace flm::ops {

using TokenId = int;

Var matmul(Var a, Var b);     // [n,k] x [k,m]
Var matmul_nt(Var a, Var b);  // [n,k] x [m,k]^T
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var mul_scalar(Var a, Var s);   // s is 1x1
Var add_rowvec(Var a, Var r);   // r is [1,cols], added to every row
Var mul_rowvec(Var a, Var r);   // r is [1,cols], multiplies every row
Var add_colvec(Var a, Var c);   // c is [rows,1], added to every column

Var sigmoid(Var a);
Var tanh(Var a);
Var gelu(Var a);  // tanh approximation

// Rows of `table` selected by ids.
Var embedding(Var table, std::span<const TokenId> ids);
// Row-wise normalization with learned gain [1,c] and shift [1,c].
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);
// Inverted dropout. A null rng or rate 0 is the identity (evaluation mode).
Var dropout(Var x, double rate, Rng* rng);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var slice_rows(Var x, std::size_t start, std::size_t count);

// Row-wise softmax where row i only sees columns 0..i.
Var causal_softmax(Var scores);
// Sum over rows of -log softmax(logits[r])[targets[r]].
Var softmax_cross_entropy(Var logits, std::span<const TokenId> targets);

Var sum(Var a);
Var rowwise_dot(Var a, Var b);  // [n,c],[n,c] -> [n,1]

// Value-only helpers.
std::vector<double> log_softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

}  // namespace flm::ops
