#pragma once

// Tape internals, shared by the op implementations. Not part of the public
// surface.

#include <functional>
#include <string>
#include <vector>

#include "gazelab/tensor.hpp"

namespace gazelab {

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<double> grad;
    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backward_fn;
    std::string op;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

inline TensorNode& node_of(const Tensor& t) {
    return const_cast<TensorNode&>(*t.node());
}

}  // namespace detail

// Records a new graph node. Parents and the backward rule are kept only when
// some input requires grad; otherwise the result is a plain leaf.
Tensor make_op(std::string op, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(detail::TensorNode&)> backward_fn);

}  // namespace gazelab
