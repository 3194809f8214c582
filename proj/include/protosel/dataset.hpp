#pragma once

#include "protosel/error.hpp"
#include "protosel/matrix.hpp"
#include "protosel/rng.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace protosel {

/// Labeled objects stored as rows of raw measurements. Immutable once built.
///
/// Row index i is the object identity used by every other module. Labels are
/// opaque tokens compared by equality; `classes()` orders them lexicographically.
class Dataset {
public:
    Dataset() = default;

    Dataset(Matrix objects, std::vector<std::string> labels, std::vector<std::string> ids = {})
        : objects_(std::move(objects)), labels_(std::move(labels)), ids_(std::move(ids)) {
        require(objects_.cols() >= 1, ErrorKind::InvalidArgument, "dataset needs at least one feature column");
        require(labels_.size() == objects_.rows(), ErrorKind::InvalidArgument,
                "label count " + std::to_string(labels_.size()) + " does not match row count " +
                    std::to_string(objects_.rows()));
        require(ids_.empty() || ids_.size() == objects_.rows(), ErrorKind::InvalidArgument,
                "id count does not match row count");
        revision_ = compute_revision();
    }

    std::size_t size() const noexcept { return objects_.rows(); }
    std::size_t dimension() const noexcept { return objects_.cols(); }
    bool empty() const noexcept { return size() == 0; }

    std::span<const double> object(std::size_t i) const { return objects_.row(i); }
    const Matrix& objects() const noexcept { return objects_; }

    const std::string& label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    /// Distinct label tokens, sorted.
    std::vector<std::string> classes() const {
        std::vector<std::string> out(labels_);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Content hash binding derived artifacts (pivot tables) to this data.
    std::uint64_t revision() const noexcept { return revision_; }

    Dataset subset(std::span<const std::size_t> rows) const {
        Matrix m(rows.size(), dimension());
        std::vector<std::string> labels;
        std::vector<std::string> ids;
        labels.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            require(rows[r] < size(), ErrorKind::OutOfRange, "subset row out of range");
            std::copy_n(object(rows[r]).begin(), dimension(), m.row(r).begin());
            labels.push_back(labels_[rows[r]]);
            if (!ids_.empty()) ids.push_back(ids_[rows[r]]);
        }
        return Dataset(std::move(m), std::move(labels), std::move(ids));
    }

private:
    std::uint64_t compute_revision() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](const void* p, std::size_t len) {
            const auto* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < len; ++i) h = (h ^ b[i]) * 0x100000001b3ULL;
        };
        const std::uint64_t shape[2] = {objects_.rows(), objects_.cols()};
        mix(shape, sizeof shape);
        mix(objects_.data().data(), objects_.data().size() * sizeof(double));
        for (const auto& l : labels_) {
            mix(l.data(), l.size());
            mix("\0", 1);
        }
        return h;
    }

    Matrix objects_;
    std::vector<std::string> labels_;
    std::vector<std::string> ids_;
    std::uint64_t revision_ = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    out.push_back(std::move(cell));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, bool& ok) {
    s = trim(s);
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    ok = !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
    return v;
}

template <class T> void write_le(std::ostream& os, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    os.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T> T read_le(std::istream& is, const std::string& what) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof value);
    require(static_cast<bool>(is), ErrorKind::Parse, "truncated binary file while reading " + what);
    return value;
}

} // namespace detail

/// Reads a CSV file whose first row is a header. The column named
/// `label_column` holds labels; all other columns are features in order.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, path.string() + ": missing header row");
    auto header = detail::split_csv_line(line);
    for (auto& h : header) h = std::string(detail::trim(h));
    auto it = std::find(header.begin(), header.end(), label_column);
    require(it != header.end(), ErrorKind::Parse, path.string() + ": label column '" + label_column + "' not found");
    const std::size_t label_pos = static_cast<std::size_t>(it - header.begin());
    const std::size_t q = header.size() - 1;
    require(q >= 1, ErrorKind::Parse, path.string() + ": no feature columns");

    std::vector<double> values;
    std::vector<std::string> labels;
    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        require(cells.size() == header.size(), ErrorKind::Parse,
                path.string() + ": row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) +
                    " columns, expected " + std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_pos) {
                auto label = std::string(detail::trim(cells[c]));
                require(!label.empty(), ErrorKind::Parse,
                        path.string() + ": row " + std::to_string(row_number) + " has an empty label");
                labels.push_back(std::move(label));
                continue;
            }
            bool ok = false;
            double v = detail::parse_double(cells[c], ok);
            require(ok, ErrorKind::Parse,
                    path.string() + ": row " + std::to_string(row_number) + " column '" + header[c] +
                        "' is not numeric: '" + cells[c] + "'");
            values.push_back(v);
        }
    }
    require(!labels.empty(), ErrorKind::Parse, path.string() + ": no data rows");
    const std::size_t n = labels.size();
    return Dataset(Matrix(n, q, std::move(values)), std::move(labels));
}

/// Writes features as f0..f{q-1} followed by the label column.
inline void save_csv(const Dataset& ds, const std::filesystem::path& path, const std::string& label_column = "label") {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    for (std::size_t c = 0; c < ds.dimension(); ++c) out << 'f' << c << ',';
    out << detail::csv_escape(label_column) << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.object(i)) out << detail::format_double(v) << ',';
        out << detail::csv_escape(ds.label(i)) << '\n';
    }
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

inline constexpr char kBinaryMagic[8] = {'P', 'R', 'O', 'T', 'O', 'S', 'E', 'L'};

/// Packed binary layout: magic "PROTOSEL", u64 n, u64 q, n*q f32, then n
/// labels each prefixed by a u32 byte length. All integers little-endian.
/// Features are narrowed to f32.
inline void save_binary(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out.write(kBinaryMagic, sizeof kBinaryMagic);
    detail::write_le<std::uint64_t>(out, ds.size());
    detail::write_le<std::uint64_t>(out, ds.dimension());
    for (double v : ds.objects().data()) detail::write_le<float>(out, static_cast<float>(v));
    for (const auto& l : ds.labels()) {
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.size()));
        out.write(l.data(), static_cast<std::streamsize>(l.size()));
    }
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

inline Dataset load_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    require(in && std::memcmp(magic, kBinaryMagic, sizeof magic) == 0, ErrorKind::Parse,
            path.string() + ": bad magic, not a PROTOSEL file");
    const auto n = detail::read_le<std::uint64_t>(in, "n");
    const auto q = detail::read_le<std::uint64_t>(in, "q");
    require(n >= 1 && q >= 1, ErrorKind::Parse, path.string() + ": empty matrix");
    std::vector<float> raw(n * q);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
    require(static_cast<bool>(in), ErrorKind::Parse, path.string() + ": truncated matrix body");
    std::vector<double> values(raw.begin(), raw.end());
    std::vector<std::string> labels(n);
    for (auto& l : labels) {
        const auto len = detail::read_le<std::uint32_t>(in, "label length");
        l.resize(len);
        in.read(l.data(), len);
        require(static_cast<bool>(in), ErrorKind::Parse, path.string() + ": truncated label");
    }
    return Dataset(Matrix(n, q, std::move(values)), std::move(labels));
}

/// Dispatches on extension: ".bin" is the packed format, anything else CSV.
inline Dataset load_dataset(const std::filesystem::path& path, const std::string& label_column = "label") {
    if (path.extension() == ".bin") return load_binary(path);
    return load_csv(path, label_column);
}

struct SplitSpec {
    double validation_fraction = 1.0;
    double train_fraction = 0.0;
    double test_fraction = 0.0;
    std::uint64_t seed = 0;
};

/// Row indices (ascending) of each part of a split.
struct SplitIndices {
    std::vector<std::size_t> validation;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct SplitDatasets {
    Dataset validation;
    Dataset train;
    Dataset test;
};

/// Stratified split: each class is shuffled under the seed and cut by
/// largest-remainder rounding, so per-class counts are within one object of
/// the exact fraction.
inline SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec) {
    const double fractions[3] = {spec.validation_fraction, spec.train_fraction, spec.test_fraction};
    require(spec.validation_fraction > 0.0 && spec.validation_fraction <= 1.0, ErrorKind::InvalidArgument,
            "validation fraction must be in (0,1]");
    require(spec.train_fraction >= 0.0 && spec.train_fraction < 1.0 && spec.test_fraction >= 0.0 &&
                spec.test_fraction < 1.0,
            ErrorKind::InvalidArgument, "train/test fractions must be in [0,1)");
    require(std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) <= 1e-9, ErrorKind::InvalidArgument,
            "split fractions must sum to 1");
    const int nonzero = (fractions[0] > 0) + (fractions[1] > 0) + (fractions[2] > 0);

    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.label(i)].push_back(i);

    SplitIndices out;
    std::vector<std::size_t>* parts[3] = {&out.validation, &out.train, &out.test};
    for (auto& [label, members] : by_class) {
        require(members.size() >= static_cast<std::size_t>(nonzero), ErrorKind::InvalidArgument,
                "class '" + label + "' has " + std::to_string(members.size()) + " members but " +
                    std::to_string(nonzero) + " nonzero splits were requested");
        auto rng = make_rng(spec.seed, {tag("split"), tag(label.c_str())});
        std::shuffle(members.begin(), members.end(), rng);

        const double m = static_cast<double>(members.size());
        std::size_t counts[3];
        double remainders[3];
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double exact = fractions[s] * m;
            counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
            remainders[s] = exact - static_cast<double>(counts[s]);
            assigned += counts[s];
        }
        std::size_t order[3] = {0, 1, 2};
        std::stable_sort(std::begin(order), std::end(order),
                         [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
        for (std::size_t r = 0; assigned < members.size(); ++r, ++assigned) ++counts[order[r % 3]];

        std::size_t offset = 0;
        for (int s = 0; s < 3; ++s) {
            parts[s]->insert(parts[s]->end(), members.begin() + static_cast<std::ptrdiff_t>(offset),
                             members.begin() + static_cast<std::ptrdiff_t>(offset + counts[s]));
            offset += counts[s];
        }
    }
    for (auto* p : parts) std::sort(p->begin(), p->end());
    return out;
}

/// Splits may be empty (e.g. fractions (1,0,0)); only loaders enforce n >= 1.
inline SplitDatasets split(const Dataset& ds, const SplitSpec& spec) {
    auto idx = split_indices(ds, spec);
    return {ds.subset(idx.validation), ds.subset(idx.train), ds.subset(idx.test)};
}

/// Isotropic Gaussian class clusters. Class centers are standard normal draws,
/// re-drawn (bounded) until at least unit distance from earlier centers;
/// `spread` is the per-coordinate standard deviation within a class.
inline Dataset generate_blobs(std::size_t classes, std::size_t per_class, std::size_t q, double spread,
                              std::uint64_t seed) {
    require(classes >= 1 && per_class >= 1 && q >= 1, ErrorKind::InvalidArgument, "blob counts must be >= 1");
    require(spread >= 0.0, ErrorKind::InvalidArgument, "spread must be >= 0");
    auto rng = make_rng(seed, {tag("blobs")});
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix centers(classes, q);
    for (std::size_t c = 0; c < classes; ++c) {
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (auto& v : centers.row(c)) v = normal(rng);
            bool separated = true;
            for (std::size_t o = 0; o < c && separated; ++o) {
                double s = 0.0;
                for (std::size_t j = 0; j < q; ++j) s += (centers(c, j) - centers(o, j)) * (centers(c, j) - centers(o, j));
                separated = s >= 1.0;
            }
            if (separated) break;
        }
    }

    Matrix objects(classes * per_class, q);
    std::vector<std::string> labels;
    labels.reserve(classes * per_class);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            auto row = objects.row(c * per_class + i);
            for (std::size_t j = 0; j < q; ++j) row[j] = centers(c, j) + spread * normal(rng);
            labels.push_back(std::to_string(c));
        }
    }
    return Dataset(std::move(objects), std::move(labels));
}

} // namespace protosel
