#pragma once

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>
#include <nlohmann/json.hpp>

#include "polar6d/geometry.hpp"
#include "polar6d/image.hpp"
#include "polar6d/polarimetry.hpp"

namespace polar6d {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MeshLoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline float byteswap_float(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u = ((u & 0xff000000u) >> 24) | ((u & 0x00ff0000u) >> 8) |
        ((u & 0x0000ff00u) << 8) | ((u & 0x000000ffu) << 24);
    std::memcpy(&v, &u, 4);
    return v;
}

inline std::string read_pfm_token(std::istream& in) {
    std::string tok;
    in >> tok;
    if (!in) throw FormatError("PFM: truncated header");
    return tok;
}

// Reads the sample block of a PFM file (channels = 1 or 3), handling both
// endiannesses and the bottom-to-top row order.
inline std::vector<float> read_pfm_samples(const std::string& path, int channels_expected,
                                           int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("PFM: cannot open " + path);

    std::string magic = read_pfm_token(in);
    int channels;
    if (magic == "Pf") channels = 1;
    else if (magic == "PF") channels = 3;
    else throw FormatError("PFM: bad magic '" + magic + "' in " + path);
    if (channels != channels_expected)
        throw FormatError("PFM: expected " + std::to_string(channels_expected) +
                          " channel(s) in " + path);

    try {
        width = std::stoi(read_pfm_token(in));
        height = std::stoi(read_pfm_token(in));
    } catch (const std::exception&) {
        throw FormatError("PFM: malformed dimensions in " + path);
    }
    double scale;
    try {
        scale = std::stod(read_pfm_token(in));
    } catch (const std::exception&) {
        throw FormatError("PFM: malformed scale in " + path);
    }
    if (width <= 0 || height <= 0 || scale == 0.0)
        throw FormatError("PFM: invalid header values in " + path);
    in.ignore(1);  // single whitespace before the raster

    const bool file_big_endian = scale > 0.0;
    const bool host_little = std::endian::native == std::endian::little;

    std::vector<float> data(static_cast<size_t>(width) * height * channels);
    // PFM stores rows bottom-to-top.
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(data.data() +
                    static_cast<size_t>(y) * width * channels),
                static_cast<std::streamsize>(width) * channels * sizeof(float));
        if (!in) throw FormatError("PFM: truncated raster in " + path);
    }
    if (file_big_endian == host_little)
        for (float& v : data) v = byteswap_float(v);
    return data;
}

inline void write_pfm_samples(const std::string& path, const float* data, int width,
                              int height, int channels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("PFM: cannot open " + path + " for writing");
    out << (channels == 3 ? "PF" : "Pf") << "\n"
        << width << " " << height << "\n"
        << "-1.0" << "\n";
    const bool host_little = std::endian::native == std::endian::little;
    std::vector<float> row(static_cast<size_t>(width) * channels);
    for (int y = height - 1; y >= 0; --y) {
        const float* src = data + static_cast<size_t>(y) * width * channels;
        if (host_little) {
            out.write(reinterpret_cast<const char*>(src),
                      static_cast<std::streamsize>(width) * channels * sizeof(float));
        } else {
            for (size_t i = 0; i < row.size(); ++i) row[i] = byteswap_float(src[i]);
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size()) * sizeof(float));
        }
    }
    if (!out) throw IoError("PFM: write failed for " + path);
}

} // namespace detail

inline Image<double> read_pfm(const std::string& path) {
    int w, h;
    std::vector<float> data = detail::read_pfm_samples(path, 1, w, h);
    Image<double> img(w, h);
    for (size_t p = 0; p < img.size(); ++p) img[p] = data[p];
    return img;
}

inline void write_pfm(const std::string& path, const Image<double>& img) {
    std::vector<float> data(img.size());
    for (size_t p = 0; p < img.size(); ++p) data[p] = static_cast<float>(img[p]);
    detail::write_pfm_samples(path, data.data(), img.width(), img.height(), 1);
}

inline Image<Eigen::Vector3d> read_pfm3(const std::string& path) {
    int w, h;
    std::vector<float> data = detail::read_pfm_samples(path, 3, w, h);
    Image<Eigen::Vector3d> img(w, h);
    for (size_t p = 0; p < img.size(); ++p)
        img[p] = {data[3 * p], data[3 * p + 1], data[3 * p + 2]};
    return img;
}

inline void write_pfm3(const std::string& path, const Image<Eigen::Vector3d>& img) {
    std::vector<float> data(img.size() * 3);
    for (size_t p = 0; p < img.size(); ++p) {
        data[3 * p] = static_cast<float>(img[p].x());
        data[3 * p + 1] = static_cast<float>(img[p].y());
        data[3 * p + 2] = static_cast<float>(img[p].z());
    }
    detail::write_pfm_samples(path, data.data(), img.width(), img.height(), 3);
}

inline void write_png_rgb8(const std::string& path, const std::vector<uint8_t>& rgb,
                           int width, int height) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr))
        throw IoError("PNG: write failed for " + path + ": " + img.message);
}

namespace detail {

inline std::array<uint8_t, 3> hsv_to_rgb8(double h, double s, double v) {
    h = wrap_2pi(h) / (kPi / 3.0);  // sextant
    int i = static_cast<int>(h) % 6;
    double f = h - std::floor(h);
    double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r, g, b;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    auto to8 = [](double x) { return static_cast<uint8_t>(std::clamp(x, 0.0, 1.0) * 255.0 + 0.5); };
    return {to8(r), to8(g), to8(b)};
}

} // namespace detail

enum class VisKind { Dop, Aop, Normal };

/// Lossy 8-bit previews: DoP as gray, AoP as hue, normals as (n+1)/2 RGB.
inline void write_visualization(const std::string& path, const Image<double>& map,
                                VisKind kind) {
    std::vector<uint8_t> rgb(map.size() * 3);
    for (size_t p = 0; p < map.size(); ++p) {
        if (kind == VisKind::Dop) {
            auto g = static_cast<uint8_t>(std::clamp(map[p], 0.0, 1.0) * 255.0 + 0.5);
            rgb[3 * p] = rgb[3 * p + 1] = rgb[3 * p + 2] = g;
        } else {
            auto c = detail::hsv_to_rgb8(wrap_pi(map[p]) * 2.0, 1.0, 1.0);
            rgb[3 * p] = c[0];
            rgb[3 * p + 1] = c[1];
            rgb[3 * p + 2] = c[2];
        }
    }
    write_png_rgb8(path, rgb, map.width(), map.height());
}

inline void write_visualization(const std::string& path,
                                const Image<Eigen::Vector3d>& normals) {
    std::vector<uint8_t> rgb(normals.size() * 3);
    for (size_t p = 0; p < normals.size(); ++p)
        for (int c = 0; c < 3; ++c)
            rgb[3 * p + c] = static_cast<uint8_t>(
                std::clamp((normals[p][c] + 1.0) / 2.0, 0.0, 1.0) * 255.0 + 0.5);
    write_png_rgb8(path, rgb, normals.width(), normals.height());
}

/// OBJ subset: v, vn, f (triangles; larger polygons fan-triangulated).
/// Faces may use v, v/vt, v//vn or v/vt/vn references.
inline Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshLoadError("cannot open mesh file " + path);

    Mesh mesh;
    std::vector<Eigen::Vector3d> normals;
    std::vector<std::array<int, 2>> corners;  // (vertex, normal or -1) per face corner
    std::vector<size_t> face_sizes;
    bool any_normal_ref = false;

    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw MeshLoadError(path + ":" + std::to_string(line_no) + ": " + msg);
    };

    std::vector<std::array<int, 2>> face;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Eigen::Vector3d p;
            if (!(ls >> p.x() >> p.y() >> p.z())) fail("malformed vertex");
            mesh.vertices.push_back(p);
        } else if (tag == "vn") {
            Eigen::Vector3d n;
            if (!(ls >> n.x() >> n.y() >> n.z())) fail("malformed normal");
            normals.push_back(n);
        } else if (tag == "f") {
            face.clear();
            std::string ref;
            while (ls >> ref) {
                int vi = 0, ni = -1;
                size_t s1 = ref.find('/');
                try {
                    vi = std::stoi(ref.substr(0, s1));
                    if (s1 != std::string::npos) {
                        size_t s2 = ref.find('/', s1 + 1);
                        if (s2 != std::string::npos && s2 + 1 < ref.size())
                            ni = std::stoi(ref.substr(s2 + 1));
                    }
                } catch (const std::exception&) {
                    fail("malformed face reference '" + ref + "'");
                }
                int nv = static_cast<int>(mesh.vertices.size());
                int nn = static_cast<int>(normals.size());
                if (vi < 0) vi = nv + vi + 1;
                if (ni < 0 && ni != -1) ni = nn + ni + 1;
                if (vi < 1 || vi > nv) fail("vertex index out of range");
                if (ni != -1 && (ni < 1 || ni > nn)) fail("normal index out of range");
                face.push_back({vi - 1, ni - 1});
                if (ni != -1) any_normal_ref = true;
            }
            if (face.size() < 3) fail("face with fewer than 3 vertices");
            face_sizes.push_back(face.size());
            corners.insert(corners.end(), face.begin(), face.end());
        }
        // other tags (vt, usemtl, o, g, s, mtllib) are ignored
    }
    if (mesh.vertices.empty() || face_sizes.empty())
        throw MeshLoadError(path + ": no geometry found");

    if (any_normal_ref) {
        // Average referenced normals per vertex so vertices keep one normal.
        mesh.vertex_normals.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
        size_t at = 0;
        for (size_t fsz : face_sizes) {
            for (size_t k = 0; k < fsz; ++k) {
                auto [vi, ni] = corners[at + k];
                if (ni >= 0) mesh.vertex_normals[vi] += normals[ni];
            }
            at += fsz;
        }
        for (auto& n : mesh.vertex_normals) {
            double len = n.norm();
            if (len > 0) n /= len;
        }
        bool missing = false;
        for (const auto& n : mesh.vertex_normals)
            if (n.squaredNorm() == 0.0) missing = true;
        if (missing) mesh.vertex_normals.clear();
    }

    size_t at = 0;
    for (size_t fsz : face_sizes) {
        for (size_t k = 1; k + 1 < fsz; ++k)  // fan triangulation
            mesh.faces.push_back({corners[at][0], corners[at + k][0], corners[at + k + 1][0]});
        at += fsz;
    }

    finalize_mesh(mesh);
    return mesh;
}

inline void save_mesh_obj(const std::string& path, const Mesh& mesh) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.precision(17);
    for (const auto& v : mesh.vertices)
        out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& n : mesh.vertex_normals)
        out << "vn " << n.x() << " " << n.y() << " " << n.z() << "\n";
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << "//" << f[0] + 1 << " " << f[1] + 1 << "//" << f[1] + 1
            << " " << f[2] + 1 << "//" << f[2] + 1 << "\n";
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline void require_fields(const nlohmann::json& j, const std::vector<std::string>& required,
                           const std::vector<std::string>& optional, const std::string& what) {
    for (const auto& f : required)
        if (!j.contains(f)) throw ConfigError(what + ": missing field '" + f + "'");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                     std::find(optional.begin(), optional.end(), key) != optional.end();
        if (!known) throw ConfigError(what + ": unknown field '" + key + "'");
    }
}

inline Pose pose_from_json(const nlohmann::json& j) {
    require_fields(j, {"rotation_wxyz", "translation_m"}, {}, "pose");
    auto q = j.at("rotation_wxyz").get<std::vector<double>>();
    auto t = j.at("translation_m").get<std::vector<double>>();
    if (q.size() != 4 || t.size() != 3)
        throw ConfigError("pose: rotation_wxyz needs 4 values, translation_m needs 3");
    Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    if (std::abs(quat.norm() - 1.0) > 1e-6)
        throw ConfigError("pose: quaternion is not unit norm");
    Pose pose;
    pose.rotation = quat.normalized().toRotationMatrix();
    pose.translation = {t[0], t[1], t[2]};
    return pose;
}

inline nlohmann::json pose_to_json(const Pose& pose) {
    Eigen::Quaterniond q(pose.rotation);
    if (q.w() < 0) q.coeffs() *= -1.0;
    return {{"rotation_wxyz", {q.w(), q.x(), q.y(), q.z()}},
            {"translation_m",
             {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
    require_fields(j, {"fx", "fy", "cx", "cy", "width", "height"}, {}, "camera");
    Camera cam{j.at("fx"), j.at("fy"), j.at("cx"), j.at("cy"), j.at("width"), j.at("height")};
    cam.validate();
    return cam;
}

inline void save_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

} // namespace polar6d
