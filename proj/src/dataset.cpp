#include "flexsim/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "flexsim/errors.hpp"

namespace flexsim {

DataMatrix make_blobs(int classes, int features, int samples, std::uint64_t seed,
                      double noise_std) {
    if (classes < 2 || features < 1 || samples < classes)
        throw InvalidSpec("make_blobs: need >= 2 classes, >= 1 feature, samples >= classes");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mean_dist(-0.6, 0.6);
    std::normal_distribution<double> noise(0.0, noise_std);

    std::vector<double> means(static_cast<std::size_t>(classes) * features);
    for (auto& m : means) m = mean_dist(rng);

    DataMatrix data;
    data.n = samples;
    data.d = features;
    data.classes = classes;
    data.x.resize(static_cast<std::size_t>(samples) * features);
    data.y.resize(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const int label = i % classes;
        data.y[static_cast<std::size_t>(i)] = label;
        for (int j = 0; j < features; ++j)
            data.x[static_cast<std::size_t>(i) * features + j] =
                means[static_cast<std::size_t>(label) * features + j] + noise(rng);
    }
    // shuffle rows so batches are not class-periodic
    std::vector<int> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    DataMatrix shuffled = data;
    for (int i = 0; i < samples; ++i) {
        const int src = order[static_cast<std::size_t>(i)];
        shuffled.y[static_cast<std::size_t>(i)] = data.y[static_cast<std::size_t>(src)];
        std::copy_n(data.x.begin() + static_cast<std::ptrdiff_t>(src) * features, features,
                    shuffled.x.begin() + static_cast<std::ptrdiff_t>(i) * features);
    }
    return shuffled;
}

DataMatrix load_csv_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open dataset '" + path + "'");
    std::string line;
    if (!std::getline(is, line)) throw IoError("dataset '" + path + "': empty file");

    std::vector<std::string> header;
    {
        std::istringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) header.push_back(col);
    }
    int label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "label") label_col = static_cast<int>(i);
    if (label_col < 0) throw IoError("dataset '" + path + "': no 'label' column");
    const int d = static_cast<int>(header.size()) - 1;
    if (d < 1) throw IoError("dataset '" + path + "': no feature columns");

    DataMatrix data;
    data.d = d;
    int max_label = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        int col = 0;
        int row_label = -1;
        std::vector<double> feats;
        feats.reserve(static_cast<std::size_t>(d));
        while (std::getline(ss, field, ',')) {
            try {
                if (col == label_col)
                    row_label = std::stoi(field);
                else
                    feats.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw IoError("dataset '" + path + "': bad value '" + field + "'");
            }
            ++col;
        }
        if (col != static_cast<int>(header.size()) || row_label < 0)
            throw IoError("dataset '" + path + "': malformed row");
        data.x.insert(data.x.end(), feats.begin(), feats.end());
        data.y.push_back(row_label);
        max_label = std::max(max_label, row_label);
        ++data.n;
    }
    if (data.n == 0) throw IoError("dataset '" + path + "': no rows");
    data.classes = max_label + 1;
    return data;
}

Batch make_batch(const DataMatrix& data, std::int64_t t, int batch_size) {
    Batch b;
    b.size = batch_size;
    b.features = data.d;
    b.x.resize(static_cast<std::size_t>(batch_size) * data.d);
    b.y.resize(static_cast<std::size_t>(batch_size));
    for (int j = 0; j < batch_size; ++j) {
        const std::int64_t row = (t * batch_size + j) % data.n;
        std::copy_n(data.x.begin() + static_cast<std::ptrdiff_t>(row) * data.d, data.d,
                    b.x.begin() + static_cast<std::ptrdiff_t>(j) * data.d);
        b.y[static_cast<std::size_t>(j)] = data.y[static_cast<std::size_t>(row)];
    }
    return b;
}

}  // namespace flexsim
