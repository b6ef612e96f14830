#include "creadiff/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "creadiff/errors.hpp"

namespace creadiff {

const std::vector<std::string>& prompt_mediums() {
    static const std::vector<std::string> mediums = {"painting of ", "picture of ", "drawing of "};
    return mediums;
}

const std::vector<std::string>& prompt_subjects() {
    static const std::vector<std::string> subjects = {"a man",      "a woman",   "a landscape",
                                                      "nature",     "a building", "an animal",
                                                      "shapes",     "an object"};
    return subjects;
}

PromptSpec compose_prompt(Rng& rng) {
    if (rng.uniform() < 0.10) return PromptSpec::null();
    const auto combo = static_cast<std::size_t>(rng.uniform_int(0, 23));
    PromptSpec p;
    p.medium = prompt_mediums()[combo / 8];
    p.subject = prompt_subjects()[combo % 8];
    p.text = p.medium + p.subject;
    p.is_null = false;
    return p;
}

const std::vector<std::string>& wikiart_styles() {
    static const std::vector<std::string> styles = {
        "contemporary-realism", "art-nouveau-modern",        "abstract-expressionism",
        "northern-renaissance", "mannerism-late-renaissance", "early-renaissance",
        "realism",              "action-painting",           "color-field-painting",
        "pop-art",              "new-realism",               "pointillism",
        "expressionism",        "analytical-cubism",         "symbolism",
        "fauvism",              "minimalism",                "cubism",
        "romanticism",          "ukiyo-e",                   "high-renaissance",
        "synthetic-cubism",     "baroque",                   "post-impressionism",
        "impressionism",        "rococo",                    "na-ve-art-primitivism"};
    return styles;
}

std::vector<LabeledIndex> BalancedDataset::flattened() const {
    std::vector<LabeledIndex> out;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        for (std::size_t item : per_class[c]) out.push_back({item, static_cast<int>(c)});
    }
    return out;
}

BalancedDataset balance_classes(const std::vector<std::vector<std::size_t>>& per_class_items,
                                int n_per_class, Rng& rng) {
    if (n_per_class < 1) throw ConfigError("balance_classes: n_per_class must be >= 1");
    BalancedDataset out;
    out.n_per_class = n_per_class;
    for (std::size_t c = 0; c < per_class_items.size(); ++c) {
        const auto& items = per_class_items[c];
        if (items.empty()) {
            throw DataError("balance_classes: class " + std::to_string(c) + " is empty");
        }
        std::vector<std::size_t> chosen;
        const auto n = static_cast<std::size_t>(n_per_class);
        if (items.size() >= n) {
            // Subsample without replacement via a seeded shuffle prefix.
            std::vector<std::size_t> pool = items;
            for (std::size_t i = 0; i < n; ++i) {
                const auto j = static_cast<std::size_t>(
                    rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size()) - 1));
                std::swap(pool[i], pool[j]);
            }
            chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
        } else {
            const std::size_t repeats = n / items.size();
            for (std::size_t r = 0; r < repeats; ++r) chosen.insert(chosen.end(), items.begin(), items.end());
            while (chosen.size() < n) {
                chosen.push_back(items[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))]);
            }
            // Shuffle so oversampled repeats are not clumped.
            for (std::size_t i = chosen.size(); i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
                std::swap(chosen[i - 1], chosen[j]);
            }
        }
        out.per_class.push_back(std::move(chosen));
    }
    return out;
}

namespace {

// Texture families, one per pseudo-style. Parameters jitter per sample.
double styled_pixel(int family, int x, int y, int c, double phase, double freq, double tilt) {
    switch (family % 6) {
        case 0:  // horizontal stripes
            return std::sin(freq * y + phase + 0.3 * c);
        case 1:  // checkerboard
            return (((x / std::max(1, static_cast<int>(2.0 + 2.0 * tilt)) +
                      y / std::max(1, static_cast<int>(2.0 + 2.0 * tilt))) %
                     2) == 0)
                       ? 0.8 - 0.1 * c
                       : -0.8 + 0.1 * c;
        case 2:  // radial dots
        {
            const double dx = x - 4.0 * tilt, dy = y - 4.0 * tilt;
            return std::cos(freq * std::sqrt(dx * dx + dy * dy) + phase + 0.2 * c);
        }
        case 3:  // diagonal gradient
            return std::tanh(0.15 * ((x - y) * (1.0 + tilt) + phase) + 0.1 * c);
        case 4:  // vertical stripes
            return std::sin(freq * x + phase - 0.3 * c);
        default:  // plaid
            return 0.5 * std::sin(freq * x + phase) + 0.5 * std::cos(freq * y - phase + 0.25 * c);
    }
}

}  // namespace

StyledShapesCorpus make_styled_shapes(int n_styles, int per_class, int image_dim, std::uint64_t seed) {
    if (n_styles < 1 || per_class < 1 || image_dim < 2) {
        throw ConfigError("make_styled_shapes: bad corpus parameters");
    }
    StyledShapesCorpus corpus;
    corpus.n_styles = n_styles;
    corpus.image_dim = image_dim;
    Rng rng(seed);
    for (int s = 0; s < n_styles; ++s) {
        for (int i = 0; i < per_class; ++i) {
            const double phase = rng.uniform(0.0, 6.28);
            const double freq = 0.6 + 0.5 * rng.uniform();
            const double tilt = rng.uniform();
            const double noise_amp = 0.08;
            Tensor img({1, image_dim, image_dim, 3});
            for (int y = 0; y < image_dim; ++y) {
                for (int x = 0; x < image_dim; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        double v = styled_pixel(s, x, y, c, phase, freq, tilt);
                        v += noise_amp * rng.normal();
                        img.at(0, y, x, c) = std::clamp(v, -1.0, 1.0);
                    }
                }
            }
            corpus.images.push_back(std::move(img));
            corpus.labels.push_back(s);
        }
    }
    return corpus;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "creadiff-manifest v1\n";
    out << class_names.size() << "\n";
    for (const auto& n : class_names) out << n << "\n";
    for (const auto& e : entries) out << e.class_index << "\t" << e.path << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string header;
    std::getline(in, header);
    if (header != "creadiff-manifest v1") throw IoError(path + ": not a creadiff-manifest v1 file");
    std::size_t n_classes = 0;
    in >> n_classes;
    in.ignore();
    DatasetManifest m;
    for (std::size_t i = 0; i < n_classes; ++i) {
        std::string name;
        std::getline(in, name);
        m.class_names.push_back(name);
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw IoError(path + ": malformed manifest line");
        DatasetManifestEntry e;
        e.class_index = std::stoi(line.substr(0, tab));
        e.path = line.substr(tab + 1);
        m.entries.push_back(std::move(e));
    }
    return m;
}

DatasetManifest scan_class_directories(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError(root + " is not a directory");
    DatasetManifest m;
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& dir : class_dirs) {
        const int idx = static_cast<int>(m.class_names.size());
        m.class_names.push_back(dir.filename().string());
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(dir)) {
            if (f.is_regular_file()) files.push_back(f.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) m.entries.push_back({f.string(), idx});
    }
    if (m.class_names.empty()) throw DataError(root + " contains no class directories");
    return m;
}

}  // namespace creadiff
