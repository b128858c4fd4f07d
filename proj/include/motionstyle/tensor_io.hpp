// Binary tensor container.
//
// Segment record (one file per segment):
//   magic "TSTY" | version u32 | five (rows u32, cols u32) pairs for
//   speech/text/pose/face/tags | the five matrices, row-major, f32 LE.
//
// Normalization stats reuse the same five-slot record: speech/text/pose/face
// slots are 2 x channels (row 0 = mean, row 1 = std) and the tags slot is a
// 1x1 matrix holding epsilon.
//
// Checkpoints use a named-tensor block: magic "TSTY" | version | count u32 |
// per tensor (name_len u32, name bytes, rows u32, cols u32, dtype u32 {4,8},
// row-major payload).
#pragma once

#include "motionstyle/common.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace motionstyle {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

inline constexpr char kContainerMagic[4] = {'T', 'S', 'T', 'Y'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct SegmentRecord {
    Mat64 speech;  // T x M
    Mat64 text;    // T x text_dim
    Mat64 pose;    // T x pose_dim
    Mat64 face;    // T x face_dim
    Mat64 tags;    // 1 x K
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& ctx) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4))
        throw DataError("truncated container while reading " + ctx);
    return v;
}

inline void put_matrix_f32(std::ostream& os, const Mat64& m) {
    std::vector<float> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row[static_cast<std::size_t>(c)] = static_cast<float>(m(r, c));
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

inline Mat64 get_matrix_f32(std::istream& is, std::uint32_t rows, std::uint32_t cols,
                            const std::string& ctx) {
    Mat64 m(rows, cols);
    std::vector<float> row(cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        if (!is.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(cols * sizeof(float))))
            throw DataError("truncated matrix payload in " + ctx);
        for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = static_cast<double>(row[c]);
    }
    return m;
}

inline void check_magic(std::istream& is, const std::string& ctx) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kContainerMagic, 4) != 0)
        throw DataError("bad magic bytes in " + ctx);
    std::uint32_t version = get_u32(is, ctx);
    if (version != kContainerVersion)
        throw DataError("unsupported container version in " + ctx);
}

}  // namespace detail

inline void write_segment_record(const std::filesystem::path& path, const SegmentRecord& rec) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    os.write(kContainerMagic, 4);
    detail::put_u32(os, kContainerVersion);
    const Mat64* mats[5] = {&rec.speech, &rec.text, &rec.pose, &rec.face, &rec.tags};
    for (const Mat64* m : mats) {
        detail::put_u32(os, static_cast<std::uint32_t>(m->rows()));
        detail::put_u32(os, static_cast<std::uint32_t>(m->cols()));
    }
    for (const Mat64* m : mats) detail::put_matrix_f32(os, *m);
    if (!os) throw DataError("write failed: " + path.string());
}

inline SegmentRecord read_segment_record(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open segment record: " + path.string());
    const std::string ctx = path.string();
    detail::check_magic(is, ctx);
    std::uint32_t dims[5][2];
    for (auto& d : dims) {
        d[0] = detail::get_u32(is, ctx);
        d[1] = detail::get_u32(is, ctx);
    }
    SegmentRecord rec;
    rec.speech = detail::get_matrix_f32(is, dims[0][0], dims[0][1], ctx);
    rec.text = detail::get_matrix_f32(is, dims[1][0], dims[1][1], ctx);
    rec.pose = detail::get_matrix_f32(is, dims[2][0], dims[2][1], ctx);
    rec.face = detail::get_matrix_f32(is, dims[3][0], dims[3][1], ctx);
    rec.tags = detail::get_matrix_f32(is, dims[4][0], dims[4][1], ctx);
    return rec;
}

// ---- named tensor block (checkpoints) ----

struct NamedTensor {
    std::string name;
    Mat64 value;
    bool f64 = true;  // payload dtype; f32 otherwise
};

inline void write_named_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors) {
    os.write(kContainerMagic, 4);
    detail::put_u32(os, kContainerVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        detail::put_u32(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(t.value.rows()));
        detail::put_u32(os, static_cast<std::uint32_t>(t.value.cols()));
        detail::put_u32(os, t.f64 ? 8u : 4u);
        if (t.f64) {
            for (Eigen::Index r = 0; r < t.value.rows(); ++r)
                for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
                    double v = t.value(r, c);
                    os.write(reinterpret_cast<const char*>(&v), 8);
                }
        } else {
            detail::put_matrix_f32(os, t.value);
        }
    }
}

inline std::vector<NamedTensor> read_named_tensors(std::istream& is, const std::string& ctx) {
    detail::check_magic(is, ctx);
    std::uint32_t count = detail::get_u32(is, ctx);
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        std::uint32_t name_len = detail::get_u32(is, ctx);
        t.name.resize(name_len);
        if (!is.read(t.name.data(), name_len)) throw DataError("truncated tensor name in " + ctx);
        std::uint32_t rows = detail::get_u32(is, ctx);
        std::uint32_t cols = detail::get_u32(is, ctx);
        std::uint32_t dtype = detail::get_u32(is, ctx);
        if (dtype == 8) {
            t.f64 = true;
            t.value.resize(rows, cols);
            for (std::uint32_t r = 0; r < rows; ++r)
                for (std::uint32_t c = 0; c < cols; ++c) {
                    double v;
                    if (!is.read(reinterpret_cast<char*>(&v), 8))
                        throw DataError("truncated tensor payload in " + ctx);
                    t.value(r, c) = v;
                }
        } else if (dtype == 4) {
            t.f64 = false;
            t.value = detail::get_matrix_f32(is, rows, cols, ctx);
        } else {
            throw DataError("unknown tensor dtype in " + ctx);
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace motionstyle
