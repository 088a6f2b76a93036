#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "videotree/errors.hpp"

namespace videotree {

struct FrameEmbedding {
    std::uint32_t frame_index = 0;
    double timestamp = 0.0;  // seconds from video start
    std::vector<float> vector;
};

// Ordered per-frame embeddings for one video. Immutable after load; shared
// read-only across concurrent pipeline runs.
struct FeatureSet {
    std::string video_id;
    std::uint32_t dim = 0;
    double fps = 1.0;
    std::vector<FrameEmbedding> frames;

    std::size_t size() const { return frames.size(); }
};

enum class FeatureFormat { binary, lines };

struct ValidationReport {
    std::size_t frame_count = 0;
    std::vector<std::vector<std::uint32_t>> duplicate_groups;  // frame indices, exact-equal vectors
    std::vector<std::uint32_t> zero_vectors;
};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32_le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32_le(out, bits);
}

inline void put_f64_le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64_le(out, bits);
}

class LeReader {
public:
    LeReader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    bool remaining(std::size_t n) const { return pos_ + n <= size_; }

    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    double f64() {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

private:
    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::string video_id_from_path(const std::filesystem::path& path) {
    return path.stem().string();
}

inline void check_vector_finite(const std::vector<float>& v, std::size_t record) {
    for (float c : v) {
        if (!std::isfinite(c))
            throw FormatError("non-finite vector component at record " + std::to_string(record));
    }
}

}  // namespace detail

inline FeatureSet load_features_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + path.string());
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
    detail::LeReader r(bytes, raw.size());

    if (!r.remaining(4 + 4 + 4 + 4 + 8)) throw FormatError("truncated header in " + path.string());
    if (raw.compare(0, 4, "VTRF") != 0) throw FormatError("bad magic in " + path.string());
    (void)r.u32();  // magic already checked
    std::uint32_t version = r.u32();
    if (version != 1) throw FormatError("unsupported version " + std::to_string(version));
    std::uint32_t n = r.u32();
    std::uint32_t d = r.u32();
    if (n == 0) throw FormatError("empty feature set");
    if (d == 0) throw FormatError("zero dimension");
    double fps = r.f64();
    if (!(fps > 0.0)) throw FormatError("non-positive fps");

    FeatureSet fs;
    fs.video_id = detail::video_id_from_path(path);
    fs.dim = d;
    fs.fps = fps;
    fs.frames.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!r.remaining(std::size_t{4} * d))
            throw FormatError("truncated vector at record " + std::to_string(i));
        auto& fr = fs.frames[i];
        fr.frame_index = i;
        fr.vector.resize(d);
        for (std::uint32_t j = 0; j < d; ++j) fr.vector[j] = r.f32();
        detail::check_vector_finite(fr.vector, i);
    }
    double prev_t = -1.0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!r.remaining(8)) throw FormatError("truncated timestamp at record " + std::to_string(i));
        double t = r.f64();
        if (!std::isfinite(t) || t < 0.0)
            throw FormatError("invalid timestamp at record " + std::to_string(i));
        if (t < prev_t)
            throw FormatError("non-monotone timestamp at record " + std::to_string(i));
        prev_t = t;
        fs.frames[i].timestamp = t;
    }
    return fs;
}

inline FeatureSet load_features_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature file: " + path.string());

    FeatureSet fs;
    fs.video_id = detail::video_id_from_path(path);
    fs.fps = 1.0;  // the lines format carries no sampling rate

    std::string line;
    std::size_t record = 0;
    std::int64_t prev_frame = -1;
    double prev_t = -1.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad JSON at record " + std::to_string(record) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("frame") || !j.contains("v"))
            throw FormatError("missing field at record " + std::to_string(record));
        std::int64_t frame = j["frame"].get<std::int64_t>();
        if (frame < 0) throw FormatError("negative frame index at record " + std::to_string(record));
        if (frame <= prev_frame)
            throw FormatError("non-monotone frame index at record " + std::to_string(record));

        FrameEmbedding fr;
        fr.frame_index = static_cast<std::uint32_t>(frame);
        if (!j["v"].is_array())
            throw FormatError("vector is not an array at record " + std::to_string(record));
        fr.vector = j["v"].get<std::vector<float>>();
        if (record == 0) {
            if (fr.vector.empty()) throw FormatError("empty vector at record 0");
            fs.dim = static_cast<std::uint32_t>(fr.vector.size());
        } else if (fr.vector.size() != fs.dim) {
            throw FormatError("inconsistent vector length at record " + std::to_string(record));
        }
        detail::check_vector_finite(fr.vector, record);

        fr.timestamp = j.contains("t") ? j["t"].get<double>()
                                       : static_cast<double>(frame) / fs.fps;
        if (!std::isfinite(fr.timestamp) || fr.timestamp < 0.0)
            throw FormatError("invalid timestamp at record " + std::to_string(record));
        if (fr.timestamp < prev_t)
            throw FormatError("non-monotone timestamp at record " + std::to_string(record));

        prev_frame = frame;
        prev_t = fr.timestamp;
        fs.frames.push_back(std::move(fr));
        ++record;
    }
    if (fs.frames.empty()) throw FormatError("empty feature set");
    return fs;
}

inline FeatureFormat detect_feature_format(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    return std::memcmp(magic, "VTRF", 4) == 0 ? FeatureFormat::binary : FeatureFormat::lines;
}

inline FeatureSet load_features(const std::filesystem::path& path, FeatureFormat format) {
    return format == FeatureFormat::binary ? load_features_binary(path)
                                           : load_features_lines(path);
}

inline FeatureSet load_features(const std::filesystem::path& path) {
    return load_features(path, detect_feature_format(path));
}

// Round-trip counterpart of load_features_binary; bit-exact for f32/f64 payloads.
inline void write_features(const FeatureSet& fs, const std::filesystem::path& path) {
    std::string out;
    out.reserve(24 + fs.frames.size() * (std::size_t{4} * fs.dim + 8));
    out += "VTRF";
    detail::put_u32_le(out, 1);
    detail::put_u32_le(out, static_cast<std::uint32_t>(fs.frames.size()));
    detail::put_u32_le(out, fs.dim);
    detail::put_f64_le(out, fs.fps);
    for (const auto& fr : fs.frames)
        for (float c : fr.vector) detail::put_f32_le(out, c);
    for (const auto& fr : fs.frames) detail::put_f64_le(out, fr.timestamp);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write feature file: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// Unit-scales every non-zero vector. Idempotent bit-for-bit: vectors already
// within 1e-6 of unit norm pass through untouched (norm drift after one f32
// scaling pass stays below ~1e-7, well inside that band). Zero vectors are
// kept so frame indexing still matches the caption store; their indices land
// in *zero_frames when given.
inline FeatureSet normalize(const FeatureSet& fs,
                            std::vector<std::uint32_t>* zero_frames = nullptr) {
    FeatureSet out = fs;
    for (auto& fr : out.frames) {
        double sq = 0.0;
        for (float c : fr.vector) sq += static_cast<double>(c) * static_cast<double>(c);
        double norm = std::sqrt(sq);
        if (norm == 0.0) {
            if (zero_frames) zero_frames->push_back(fr.frame_index);
            continue;
        }
        if (std::abs(norm - 1.0) <= 1e-6) continue;
        for (float& c : fr.vector) c = static_cast<float>(static_cast<double>(c) / norm);
    }
    return out;
}

inline ValidationReport validate(const FeatureSet& fs) {
    ValidationReport rep;
    rep.frame_count = fs.frames.size();
    // Bitwise keys: exact equality, stable with any float content.
    std::map<std::string, std::vector<std::uint32_t>> groups;
    for (const auto& fr : fs.frames) {
        std::string key(reinterpret_cast<const char*>(fr.vector.data()),
                        fr.vector.size() * sizeof(float));
        groups[key].push_back(fr.frame_index);

        bool all_zero = true;
        for (float c : fr.vector)
            if (c != 0.0f) { all_zero = false; break; }
        if (all_zero && !fr.vector.empty()) rep.zero_vectors.push_back(fr.frame_index);
    }
    std::vector<std::vector<std::uint32_t>> dups;
    for (auto& [key, members] : groups)
        if (members.size() > 1) dups.push_back(members);
    std::sort(dups.begin(), dups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    rep.duplicate_groups = std::move(dups);
    return rep;
}

}  // namespace videotree
