#pragma once

#include <span>
#include <vector>

#include "rexnet/cnn.hpp"
#include "rexnet/saliency_map.hpp"

namespace rexnet::nn {

// ReLU(sum_k alpha_k A_k) with alpha_k the spatial mean of dA_k.
// activations and gradients are (K, h, w); result is h*w row-major.
std::vector<double> class_activation(const Tensor& activations, const Tensor& gradients);

std::vector<double> upsample_bilinear(std::span<const double> src, int h, int w, int out_h,
                                      int out_w);

// Min-max to [0, 1]; a constant input becomes all zeros.
void minmax_normalize(std::span<double> v);

// Grad-CAM for class_index from a cached forward pass, upsampled to the
// model input grid and normalized to [0, 1].
SaliencyMap grad_cam(const CnnModel& model, const CnnCache& cache, int class_index);

}  // namespace rexnet::nn
