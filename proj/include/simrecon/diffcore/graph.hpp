#pragma once

#include <memory>
#include <string>
#include <vector>

#include "simrecon/diffcore/kernels.hpp"
#include "simrecon/diffcore/tensor.hpp"
#include "simrecon/fft.hpp"

// Reverse-mode differentiable expression graph over 4-D dense arrays with a
// fixed primitive set. Graphs are immutable topologies built once; a Session
// holds leaf bindings plus forward/adjoint buffers and may be reused across
// evaluations.

namespace simrecon::diff {

enum class Op {
    Constant,
    Parameter,
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

std::string op_name(Op op);

template <typename T>
class Graph {
  public:
    struct Node {
        Op op = Op::Constant;
        Shape4 shape;
        std::vector<int> in;
        std::string name;
        int factor = 0;                               // BlockMean
        std::shared_ptr<const fft::FreqKernel> psf;   // PsfConv
        std::shared_ptr<const kernels::SsimConsts> ssim; // Ssim
        double eps = 0.0;                             // TotalVar
    };

    int constant(Shape4 s, const std::string& name);
    int parameter(Shape4 s, const std::string& name);
    // x:(n,cin,h,w), kernel:(cout,cin,3,3), bias:(1,cout,1,1) -> (n,cout,h,w)
    int conv2d(int x, int kernel, int bias);
    int add(int a, int b);
    int mul(int a, int b);
    int relu(int x);
    int maxpool2(int x);
    int upsample2(int x);
    int concat_channels(const std::vector<int>& xs);
    // Fixed-kernel circular convolution; gradient flows through the image only.
    int psf_conv(int x, std::shared_ptr<const fft::FreqKernel> kernel);
    int block_mean(int x, int factor);
    int mean(int x); // scalar (1,1,1,1)
    int ssim(int x, int y, std::shared_ptr<const kernels::SsimConsts> consts); // scalar
    int total_variation(int x, double eps = 1e-6); // scalar

    int size() const { return int(nodes_.size()); }
    const Node& node(int id) const { return nodes_[size_t(id)]; }
    const std::vector<Node>& nodes() const { return nodes_; }
    std::vector<int> parameters() const;

  private:
    const Node& input_node(int id, const std::string& ctx) const;
    int push(Node n);
    std::vector<Node> nodes_;
};

template <typename T>
class Session {
  public:
    explicit Session(const Graph<T>& graph);

    // Mutable storage of a Constant/Parameter leaf.
    Tensor4<T>& leaf(int id);
    void forward();
    const Tensor4<T>& value(int id) const { return values_[size_t(id)]; }
    // Reverse pass from a scalar node; adjoints of non-leaf nodes are
    // recomputed, leaves flagged trainable receive gradients.
    void backward(int loss_node);
    const Tensor4<T>& adjoint(int id) const { return adjoints_[size_t(id)]; }

  private:
    void forward_node(int id);
    void backward_node(int id);
    const Graph<T>* graph_;
    std::vector<Tensor4<T>> values_;
    std::vector<Tensor4<T>> adjoints_;
    std::vector<char> needs_grad_;
};

} // namespace simrecon::diff
