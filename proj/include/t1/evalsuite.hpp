#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t1/field.hpp"
#include "t1/model.hpp"

namespace t1 {

// peak = 2.0 for signals in [-1,1]; psnr = 10*log10(peak^2/mse).
double psnr_from_mse(double mse, double peak = 2.0);

double view_mse(const View& a, const View& b);
double field_mse(const FieldSample& a, const FieldSample& b);

// Std of the frame-to-frame object-centroid displacement vectors; 0 for
// perfectly linear motion, +inf when any view has an empty object mask.
// The mask is mean-channel > threshold; the background sits at -1.
double coherence_score(const FieldSpec& spec, const std::vector<View>& views,
                       double threshold = -0.5);

// Per-channel mean and std over every pixel of the field: [2 * signal_dim].
std::vector<double> field_feature(const FieldSample& field);
// Index of the L2-nearest centroid.
int64_t nearest_class(const std::vector<double>& feature,
                      const std::vector<std::vector<double>>& centroids);
// Mean feature per class from reference fields.
std::vector<std::vector<double>> class_centroids(
    const std::vector<std::vector<const FieldSample*>>& refs_per_class);

struct ReconEval {
    double mse = 0;
    double psnr = 0;
};

// One forward-diffuse/denoise cycle at a fixed t: noise the encoded views
// with a shared eps, predict it conditionally, invert to y0, decode, and
// compare. An untrained net predicts zero, leaving mse = (1-ab)/ab * mean(eps^2).
ReconEval eval_reconstruction(Model& model, const FieldSample& field, int64_t t, uint64_t seed);

// Generates samples_per_class fields per caption and classifies them against
// the reference centroids; returns the fraction assigned to their own class.
// Views per generated field: gen_views (capped at spec.num_views).
double condition_accuracy(Model& model, const std::vector<std::string>& captions,
                          const std::vector<std::vector<const FieldSample*>>& refs_per_class,
                          int64_t samples_per_class, int64_t gen_views, const SampleOptions& opt,
                          uint64_t seed);

}  // namespace t1
