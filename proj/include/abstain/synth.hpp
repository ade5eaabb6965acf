#pragma once

// Deterministic synthetic benchmark: Gaussian class clusters in embedding
// space, label flips in the boundary band (aleatoric), a displaced OOD
// cluster with random labels (epistemic), and linear probes supplying the
// probabilities. All reals are rounded to float precision so an in-memory
// dataset equals its on-disk form.

#include "abstain/core.hpp"

#include <cstdint>

namespace abstain {

struct SynthSpec {
    std::uint64_t seed = 7;
    std::size_t n_train = 1000;
    std::size_t n_validation = 500;
    std::size_t n_test = 1000;
    int num_classes = 3;          // clusters (and classes in multiclass mode)
    int dim = 8;
    double spacing = 4.0;         // distance between class centroids
    double overlap = 0.15;        // flip rate inside the boundary band
    double band_width = 1.5;      // margin d2 - d1 below which a point is in the band
    double ood_fraction = 0.10;   // of validation and test rows
    double ood_displacement = 1.5; // OOD centre offset, in units of spacing
    Task task = Task::multiclass;
    int num_labels = 10;          // multilabel only
    int mc_passes = 20;
    double mc_noise = 0.5;        // std of the per-pass logit perturbation

    /// Throws on an infeasible spec.
    void validate() const;
};

struct SynthDataset {
    SynthSpec spec;
    LabeledSplit train;
    LabeledSplit validation;
    LabeledSplit test;

    const LabeledSplit& split(SplitRole role) const;
};

SynthDataset generate(const SynthSpec& spec);

/// Number of OOD rows placed in a split of n rows.
std::size_t ood_count(std::size_t n, double fraction);

} // namespace abstain
