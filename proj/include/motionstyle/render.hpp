// Batch stick-figure rendering: one SVG per frame from a segment record.
//
// Joint order (x, y interleaved): neck, head, l_shoulder, l_elbow, l_wrist,
// r_shoulder, r_elbow, r_wrist, spine, l_hip, r_hip.
// Face landmark order: l_brow_out, l_brow_in, r_brow_in, r_brow_out, l_eye,
// r_eye, nose_bridge, nose_tip, l_mouth, r_mouth, mouth_top, mouth_bottom,
// l_jaw, r_jaw, chin. Coordinates are in normalized pixel units, y down.
#pragma once

#include "motionstyle/corpus.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace motionstyle {

inline const std::vector<std::pair<int, int>>& skeleton_edges() {
    static const std::vector<std::pair<int, int>> edges = {
        {0, 1},  // neck - head
        {0, 2}, {2, 3}, {3, 4},   // left arm
        {0, 5}, {5, 6}, {6, 7},   // right arm
        {0, 8}, {8, 9}, {8, 10},  // trunk to hips
        {9, 10},
    };
    return edges;
}

inline const std::vector<std::pair<int, int>>& face_edges() {
    static const std::vector<std::pair<int, int>> edges = {
        {0, 1}, {2, 3},            // brows
        {6, 7},                    // nose
        {8, 10}, {10, 9}, {9, 11}, {11, 8},  // mouth loop
        {12, 14}, {14, 13},        // jaw line through chin
    };
    return edges;
}

inline void render_frame_svg(const std::filesystem::path& path, const Mat64& pose_row,
                             const Mat64& face_row, double canvas = 512.0) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write frame: " + path.string());
    char buf[160];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << canvas << "\" height=\""
       << canvas << "\" viewBox=\"0 0 " << canvas << " " << canvas << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    auto px = [&](double v) { return v * canvas; };
    for (auto [a, b] : skeleton_edges()) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                      "stroke=\"black\" stroke-width=\"3\"/>\n",
                      px(pose_row(0, 2 * a)), px(pose_row(0, 2 * a + 1)),
                      px(pose_row(0, 2 * b)), px(pose_row(0, 2 * b + 1)));
        os << buf;
    }
    for (Eigen::Index j = 0; j < pose_row.cols() / 2; ++j) {
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"black\"/>\n",
                      px(pose_row(0, 2 * j)), px(pose_row(0, 2 * j + 1)));
        os << buf;
    }
    for (auto [a, b] : face_edges()) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                      "stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
                      px(face_row(0, 2 * a)), px(face_row(0, 2 * a + 1)),
                      px(face_row(0, 2 * b)), px(face_row(0, 2 * b + 1)));
        os << buf;
    }
    for (Eigen::Index j = 0; j < face_row.cols() / 2; ++j) {
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"steelblue\"/>\n",
                      px(face_row(0, 2 * j)), px(face_row(0, 2 * j + 1)));
        os << buf;
    }
    os << "</svg>\n";
}

// renders frame_0000.svg .. frame_NNNN.svg; limit <= 0 renders every frame
inline int render_segment_frames(const std::filesystem::path& out_dir, const FeatureBundle& b,
                                 int limit = -1) {
    std::filesystem::create_directories(out_dir);
    const Eigen::Index frames =
        limit > 0 ? std::min<Eigen::Index>(b.pose.rows(), limit) : b.pose.rows();
    char name[32];
    for (Eigen::Index t = 0; t < frames; ++t) {
        std::snprintf(name, sizeof name, "frame_%04d.svg", static_cast<int>(t));
        render_frame_svg(out_dir / name, b.pose.row(t), b.face.row(t));
    }
    return static_cast<int>(frames);
}

}  // namespace motionstyle
