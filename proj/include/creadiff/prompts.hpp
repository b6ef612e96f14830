#pragma once

#include <string>
#include <vector>

#include "creadiff/rng.hpp"
#include "creadiff/tensor.hpp"

namespace creadiff {

// Composed medium x subject text condition; text == "" iff null.
struct PromptSpec {
    std::string medium;
    std::string subject;
    std::string text;
    bool is_null = true;

    static PromptSpec null() { return PromptSpec{}; }
};

// Mediums keep their trailing space so composition is plain concatenation.
const std::vector<std::string>& prompt_mediums();   // 3 entries
const std::vector<std::string>& prompt_subjects();  // 8 entries

// With probability 0.10 the null prompt; otherwise uniform over the
// 3 x 8 = 24 medium-subject combinations.
PromptSpec compose_prompt(Rng& rng);

// The 27 WikiArt style names, in registry order. Order is stable and is
// serialized with every artifact that depends on it.
const std::vector<std::string>& wikiart_styles();

struct LabeledIndex {
    std::size_t item = 0;  // index into the caller's image store
    int style_label = 0;
};

struct BalancedDataset {
    std::vector<std::vector<std::size_t>> per_class;  // each inner list has n_per_class entries
    int n_per_class = 0;

    std::vector<LabeledIndex> flattened() const;
};

// Classes with >= n samples are subsampled without replacement; smaller
// classes repeat each sample floor(n/m) times and then fill uniformly at
// random. Every original item of an undersized class appears at least once.
BalancedDataset balance_classes(const std::vector<std::vector<std::size_t>>& per_class_items,
                                int n_per_class, Rng& rng);

// Procedural "styled shapes" corpus: per pseudo-style, a family of textures
// with randomized parameters. Deterministic given the seed. Values in [-1,1].
struct StyledShapesCorpus {
    std::vector<Tensor> images;  // each (1, dim, dim, 3)
    std::vector<int> labels;
    int n_styles = 0;
    int image_dim = 0;
};

StyledShapesCorpus make_styled_shapes(int n_styles, int per_class, int image_dim, std::uint64_t seed);

// Directory-per-class ingestion manifest for a real dataset layout
// (root/<class-name>/<image files>). Produces (path, class index) records and
// the discovered class-name order; image decoding is the loader's concern.
struct DatasetManifestEntry {
    std::string path;
    int class_index = 0;
};

struct DatasetManifest {
    std::vector<std::string> class_names;
    std::vector<DatasetManifestEntry> entries;

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

DatasetManifest scan_class_directories(const std::string& root);

}  // namespace creadiff
