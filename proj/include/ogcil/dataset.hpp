#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ogcil/graph.hpp"

namespace ogcil {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetPaths {
    std::filesystem::path features;  // one row per node, values split on ',', tab or space
    std::filesystem::path edges;     // two integer columns
    std::filesystem::path labels;    // one integer per line

    // <dir>/features.txt, <dir>/edges.txt, <dir>/labels.txt
    static DatasetPaths in_directory(const std::filesystem::path& dir);
};

struct LoadOptions {
    // Classes with fewer nodes than this are masked out (label -1). 0 keeps everything.
    std::size_t min_class_size = 0;
};

// Reads the three positional files. Duplicate and reversed edges are kept as given;
// self-loops are dropped because normalization adds them.
Graph load_dataset(const DatasetPaths& paths, const LoadOptions& options = {});

void write_dataset(const Graph& graph, const DatasetPaths& paths);

// Masks labels of classes smaller than `min_size`.
void mask_small_classes(Graph& graph, std::size_t min_size);

// Gaussian feature blobs, one per class, with homophilous random edges.
struct BlobGraphSpec {
    std::vector<int> class_sizes;  // nodes per class; class ids are positions
    int feature_dim = 16;
    double center_scale = 1.0;     // class centers ~ N(0, center_scale^2 I)
    double noise = 1.0;            // per-node feature noise std
    double avg_degree = 6.0;
    double homophily = 0.8;        // fraction of edges joining same-class nodes
    std::uint64_t seed = 0;
};

Graph make_blob_graph(const BlobGraphSpec& spec);

// Photo-sized stand-in: 8 classes with the Amazon Photo class sizes.
BlobGraphSpec photo_like_spec(std::uint64_t seed);

// Converts a gnn-benchmark style .npz (CSR adjacency/attributes plus labels).
Graph load_npz_graph(const std::filesystem::path& path);

}  // namespace ogcil
