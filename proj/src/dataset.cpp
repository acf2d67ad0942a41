#include "lg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lg {

DatasetFormat dataset_format_from_name(const std::string& s) {
    if (s == "flat-records") return DatasetFormat::flat_records;
    if (s == "cifar10-binary") return DatasetFormat::cifar10_binary;
    throw std::invalid_argument("unknown dataset format '" + s +
                                "' (expected flat-records or cifar10-binary)");
}

std::vector<std::vector<int>> ImageDataset::index_by_class() const {
    std::vector<std::vector<int>> idx(class_names.size());
    for (size_t i = 0; i < labels.size(); ++i)
        idx[labels[i]].push_back(static_cast<int>(i));
    return idx;
}

namespace {

class Reader {
public:
    Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_)
            throw std::runtime_error("cannot open dataset file " + path);
        in_.seekg(0, std::ios::end);
        file_size_ = static_cast<size_t>(in_.tellg());
        in_.seekg(0);
    }

    void need(size_t bytes, const char* what) {
        if (offset_ + bytes > file_size_) {
            std::ostringstream os;
            os << path_ << ": truncated while reading " << what << " at byte offset " << offset_
               << " (need " << bytes << " more bytes, file has " << file_size_ - offset_ << ")";
            throw std::runtime_error(os.str());
        }
    }

    void read(void* dst, size_t bytes, const char* what) {
        need(bytes, what);
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        offset_ += bytes;
    }

    uint8_t u8(const char* what) {
        uint8_t v;
        read(&v, 1, what);
        return v;
    }
    uint16_t u16(const char* what) {
        uint8_t b[2];
        read(b, 2, what);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }
    uint32_t u32(const char* what) {
        uint8_t b[4];
        read(b, 4, what);
        return static_cast<uint32_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                                     (static_cast<uint32_t>(b[3]) << 24));
    }

    size_t offset() const { return offset_; }
    size_t file_size() const { return file_size_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    size_t offset_ = 0;
    size_t file_size_ = 0;
};

void put_u16(std::ostream& os, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    os.write(b, 2);
}
void put_u32(std::ostream& os, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

ImageDataset load_flat_records(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, "LGDS", 4) != 0)
        throw std::runtime_error(path + ": bad magic at byte offset 0 (expected LGDS)");

    ImageDataset ds;
    ds.version = r.u16("version");
    if (ds.version != 1)
        throw std::runtime_error(path + ": unsupported flat-records version " +
                                 std::to_string(ds.version));
    const uint16_t class_count = r.u16("class_count");
    const uint32_t record_count = r.u32("record_count");
    ds.height = r.u16("height");
    ds.width = r.u16("width");
    ds.channels = r.u8("channels");
    if (ds.height == 0 || ds.width == 0 || ds.channels == 0)
        throw std::runtime_error(path + ": zero image dimension in header");

    for (uint16_t c = 0; c < class_count; ++c) {
        const uint16_t len = r.u16("class name length");
        std::string name(len, '\0');
        r.read(name.data(), len, "class name");
        ds.class_names.push_back(std::move(name));
    }

    const size_t rec = ds.pixels_per_record();
    ds.labels.reserve(record_count);
    ds.pixels.reserve(rec * record_count);
    std::vector<uint8_t> buf(rec);
    for (uint32_t i = 0; i < record_count; ++i) {
        const size_t label_off = r.offset();
        const uint8_t label = r.u8("record label");
        if (label >= class_count) {
            std::ostringstream os;
            os << path << ": label " << int(label) << " out of range [0, " << class_count
               << ") at byte offset " << label_off;
            throw std::runtime_error(os.str());
        }
        r.read(buf.data(), rec, "record pixels");
        ds.labels.push_back(label);
        ds.pixels.insert(ds.pixels.end(), buf.begin(), buf.end());
    }
    return ds;
}

ImageDataset load_cifar10(const std::string& path) {
    Reader r(path);
    constexpr size_t kRecord = 1 + 3072;
    if (r.file_size() % kRecord != 0) {
        std::ostringstream os;
        os << path << ": size " << r.file_size() << " is not a multiple of the " << kRecord
           << "-byte cifar10 record";
        throw std::runtime_error(os.str());
    }
    ImageDataset ds;
    ds.class_names = {"airplane", "automobile", "bird", "cat", "deer",
                      "dog", "frog", "horse", "ship", "truck"};
    ds.height = 32;
    ds.width = 32;
    ds.channels = 3;
    const size_t n = r.file_size() / kRecord;
    std::vector<uint8_t> buf(3072);
    for (size_t i = 0; i < n; ++i) {
        const size_t off = r.offset();
        const uint8_t label = r.u8("record label");
        if (label >= 10) {
            std::ostringstream os;
            os << path << ": label " << int(label) << " out of range [0, 10) at byte offset " << off;
            throw std::runtime_error(os.str());
        }
        r.read(buf.data(), buf.size(), "record pixels");
        ds.labels.push_back(label);
        ds.pixels.insert(ds.pixels.end(), buf.begin(), buf.end());
    }
    return ds;
}

}  // namespace

ImageDataset load_dataset(const std::string& path, DatasetFormat format) {
    switch (format) {
        case DatasetFormat::flat_records: return load_flat_records(path);
        case DatasetFormat::cifar10_binary: return load_cifar10(path);
    }
    throw std::logic_error("unreachable");
}

void save_flat_records(const ImageDataset& ds, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp);
        out.write("LGDS", 4);
        put_u16(out, 1);
        put_u16(out, static_cast<uint16_t>(ds.class_names.size()));
        put_u32(out, static_cast<uint32_t>(ds.count()));
        put_u16(out, static_cast<uint16_t>(ds.height));
        put_u16(out, static_cast<uint16_t>(ds.width));
        out.put(static_cast<char>(ds.channels));
        for (const auto& name : ds.class_names) {
            put_u16(out, static_cast<uint16_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
        }
        const size_t rec = ds.pixels_per_record();
        for (size_t i = 0; i < ds.count(); ++i) {
            out.put(static_cast<char>(ds.labels[i]));
            out.write(reinterpret_cast<const char*>(ds.pixels.data() + i * rec),
                      static_cast<std::streamsize>(rec));
        }
        if (!out)
            throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

ImageDataset downsample2x(const ImageDataset& ds) {
    ImageDataset out;
    out.version = ds.version;
    out.class_names = ds.class_names;
    out.channels = ds.channels;
    out.height = ds.height / 2;
    out.width = ds.width / 2;
    out.labels = ds.labels;
    const size_t rec_in = ds.pixels_per_record();
    const size_t rec_out = out.pixels_per_record();
    out.pixels.resize(rec_out * ds.count());
    for (size_t i = 0; i < ds.count(); ++i) {
        const uint8_t* src = ds.pixels.data() + i * rec_in;
        uint8_t* dst = out.pixels.data() + i * rec_out;
        for (int c = 0; c < ds.channels; ++c)
            for (int y = 0; y < out.height; ++y)
                for (int x = 0; x < out.width; ++x) {
                    int acc = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            acc += src[(static_cast<size_t>(c) * ds.height + 2 * y + dy) * ds.width +
                                       2 * x + dx];
                    dst[(static_cast<size_t>(c) * out.height + y) * out.width + x] =
                        static_cast<uint8_t>((acc + 2) / 4);
                }
    }
    return out;
}

ImageDataset limit_per_class(const ImageDataset& ds, int max_per_class) {
    ImageDataset out;
    out.version = ds.version;
    out.class_names = ds.class_names;
    out.height = ds.height;
    out.width = ds.width;
    out.channels = ds.channels;
    std::vector<int> taken(ds.class_names.size(), 0);
    const size_t rec = ds.pixels_per_record();
    for (size_t i = 0; i < ds.count(); ++i) {
        const int cls = ds.labels[i];
        if (taken[cls] >= max_per_class)
            continue;
        ++taken[cls];
        out.labels.push_back(ds.labels[i]);
        out.pixels.insert(out.pixels.end(), ds.pixels.begin() + i * rec,
                          ds.pixels.begin() + (i + 1) * rec);
    }
    return out;
}

namespace {

// Shared primitive pools: classes recombine orientations, shapes, and color
// pairs, so edge and color detectors learned on one class subset transfer to
// the others.
struct ClassRecipe {
    double angle;     // grating orientation
    double freq;      // grating frequency
    int shape;        // 0 disk, 1 square, 2 cross
    int grating_col;  // color channel of the grating
    int shape_col;    // color channel of the shape
};

ClassRecipe recipe_for(int cls) {
    static const double angles[4] = {0.0, 0.785398, 1.570796, 2.356194};
    ClassRecipe r;
    r.angle = angles[cls % 4];
    r.shape = (cls / 4) % 3;
    r.freq = 0.9 + 0.35 * ((cls / 2) % 2);
    r.grating_col = cls % 3;
    r.shape_col = (cls + 1) % 3;
    return r;
}

}  // namespace

ImageDataset synth_dataset(int classes, int per_class, uint64_t seed) {
    const int H = 16, W = 16, C = 3;
    ImageDataset ds;
    ds.height = H;
    ds.width = W;
    ds.channels = C;
    for (int c = 0; c < classes; ++c)
        ds.class_names.push_back("synth-" + std::to_string(c));
    ds.labels.reserve(static_cast<size_t>(classes) * per_class);
    ds.pixels.reserve(static_cast<size_t>(classes) * per_class * H * W * C);

    for (int cls = 0; cls < classes; ++cls) {
        const ClassRecipe rc = recipe_for(cls);
        const double ca = std::cos(rc.angle), sa = std::sin(rc.angle);
        for (int s = 0; s < per_class; ++s) {
            Rng rng(derive_seed(seed, {static_cast<uint64_t>(cls), static_cast<uint64_t>(s)}));
            const double phase = rng.uniform() * 6.283185;
            const double cx = 3.5 + rng.uniform() * (W - 8);
            const double cy = 3.5 + rng.uniform() * (H - 8);
            const double radius = 2.2 + rng.uniform() * 1.2;
            const double bright = 0.75 + rng.uniform() * 0.25;

            float img[3][16][16];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const double g = 0.5 + 0.5 * std::sin(rc.freq * (ca * x + sa * y) + phase);
                    for (int ch = 0; ch < C; ++ch) {
                        double v = 0.18;
                        if (ch == rc.grating_col)
                            v += 0.45 * g;
                        img[ch][y][x] = static_cast<float>(v);
                    }
                    const double dx = x - cx, dy = y - cy;
                    bool inside = false;
                    switch (rc.shape) {
                        case 0: inside = dx * dx + dy * dy <= radius * radius; break;
                        case 1: inside = std::abs(dx) <= radius && std::abs(dy) <= radius; break;
                        case 2:
                            inside = (std::abs(dx) <= 0.9 && std::abs(dy) <= radius) ||
                                     (std::abs(dy) <= 0.9 && std::abs(dx) <= radius);
                            break;
                    }
                    if (inside)
                        img[rc.shape_col][y][x] += 0.5f;
                }

            for (int ch = 0; ch < C; ++ch)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        double v = img[ch][y][x] * bright + (rng.uniform() - 0.5) * 0.12;
                        v = std::clamp(v, 0.0, 1.0);
                        ds.pixels.push_back(static_cast<uint8_t>(v * 255.0 + 0.5));
                    }
            ds.labels.push_back(static_cast<uint8_t>(cls));
        }
    }
    return ds;
}

Samples gather_samples(const ImageDataset& ds, const std::vector<int>& classes,
                       const std::vector<std::vector<int>>& per_class_indices) {
    Samples s;
    s.channels = ds.channels;
    s.height = ds.height;
    s.width = ds.width;
    const size_t rec = ds.pixels_per_record();
    for (size_t local = 0; local < classes.size(); ++local) {
        for (int idx : per_class_indices[classes[local]]) {
            s.pixels.insert(s.pixels.end(), ds.pixels.begin() + static_cast<size_t>(idx) * rec,
                            ds.pixels.begin() + static_cast<size_t>(idx + 1) * rec);
            s.labels.push_back(static_cast<int>(local));
        }
    }
    return s;
}

ClassSplit split_classes(const ImageDataset& ds, double holdout_fraction, uint64_t seed) {
    ClassSplit split;
    auto by_class = ds.index_by_class();
    split.train.resize(by_class.size());
    split.holdout.resize(by_class.size());
    for (size_t cls = 0; cls < by_class.size(); ++cls) {
        auto& idx = by_class[cls];
        Rng rng(derive_seed(seed, {kStreamSplit, cls}));
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.below(i)]);
        size_t hold = static_cast<size_t>(std::floor(holdout_fraction * idx.size()));
        if (idx.size() > 1 && hold == 0 && holdout_fraction > 0)
            hold = 1;
        split.holdout[cls].assign(idx.begin(), idx.begin() + hold);
        split.train[cls].assign(idx.begin() + hold, idx.end());
        std::sort(split.holdout[cls].begin(), split.holdout[cls].end());
        std::sort(split.train[cls].begin(), split.train[cls].end());
    }
    return split;
}

}  // namespace lg
