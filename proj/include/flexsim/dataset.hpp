#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flexsim {

/// Row-major labeled dataset. `x` holds n rows of d features each.
struct DataMatrix {
    int n = 0;
    int d = 0;
    int classes = 0;
    std::vector<double> x;
    std::vector<int> y;
};

/// Class-conditional Gaussian blobs: per-class mean drawn uniform in
/// [-0.6, 0.6] per feature, isotropic noise, rows shuffled. Deterministic for
/// a given seed; features land roughly in unit range.
DataMatrix make_blobs(int classes, int features, int samples, std::uint64_t seed,
                      double noise_std = 0.3);

/// CSV loader: header row required, label column named "label", every other
/// column a real feature. Labels must be integers in [0, k).
DataMatrix load_csv_dataset(const std::string& path);

struct Batch {
    int size = 0;
    int features = 0;
    std::vector<double> x;
    std::vector<int> y;
};

/// Deterministic wrap-around batching: batch t covers rows
/// [t*batch_size, ...) modulo n, so every batch is full.
Batch make_batch(const DataMatrix& data, std::int64_t t, int batch_size);

}  // namespace flexsim
