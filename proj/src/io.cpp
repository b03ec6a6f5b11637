#include "qfit/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "qfit/errors.hpp"

namespace qfit {

namespace {

using json = nlohmann::json;

constexpr int kHeaderSize = 348;
constexpr float kVoxOffset = 352.0f;
constexpr int16_t kDtFloat32 = 16;
constexpr int16_t kDtFloat64 = 64;

std::vector<char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    std::streamoff n = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<char> buf(static_cast<size_t>(n));
    f.read(buf.data(), n);
    if (!f) throw DataError("short read: " + path);
    return buf;
}

template <typename T>
T get_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw DataError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace

Volume read_nifti(const std::string& path) {
    std::vector<char> buf = read_file(path);
    if (buf.size() < kHeaderSize) throw DataError("nifti: file too small: " + path);
    if (get_le<int32_t>(buf.data()) != kHeaderSize)
        throw DataError("nifti: bad sizeof_hdr (big-endian or not NIfTI-1): " + path);
    if (std::strncmp(buf.data() + 344, "n+1", 3) != 0)
        throw DataError("nifti: unsupported magic (need single-file n+1): " + path);

    int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = get_le<int16_t>(buf.data() + 40 + 2 * i);
    int ndim = dim[0];
    if (ndim < 1 || ndim > 4) throw DataError("nifti: only 1..4 dimensions supported: " + path);
    int nx = dim[1], ny = ndim >= 2 ? dim[2] : 1, nz = ndim >= 3 ? dim[3] : 1,
        nt = ndim >= 4 ? dim[4] : 1;
    if (nx < 1 || ny < 1 || nz < 1 || nt < 1) throw DataError("nifti: bad dims: " + path);

    int16_t datatype = get_le<int16_t>(buf.data() + 70);
    int16_t bitpix = get_le<int16_t>(buf.data() + 72);
    if (datatype != kDtFloat32 && datatype != kDtFloat64)
        throw DataError("nifti: only float32/float64 supported: " + path);
    if ((datatype == kDtFloat32 && bitpix != 32) || (datatype == kDtFloat64 && bitpix != 64))
        throw DataError("nifti: datatype/bitpix mismatch: " + path);

    size_t offset = static_cast<size_t>(get_le<float>(buf.data() + 108));
    if (offset < kHeaderSize) throw DataError("nifti: bad vox_offset: " + path);
    size_t n_vals = static_cast<size_t>(nx) * ny * nz * nt;
    size_t bytes = n_vals * (bitpix / 8);
    if (buf.size() < offset + bytes) throw DataError("nifti: truncated data: " + path);

    Volume vol;
    vol.dims = {nx, ny, nz};
    vol.n_meas = nt;
    vol.v.resize(n_vals);
    // disk order: x fastest, t slowest
    const char* data = buf.data() + offset;
    size_t idx = 0;
    for (int t = 0; t < nt; ++t)
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x, ++idx) {
                    double val = datatype == kDtFloat32
                                     ? static_cast<double>(get_le<float>(data + idx * 4))
                                     : get_le<double>(data + idx * 8);
                    size_t cell = (static_cast<size_t>(x) * ny + y) * nz + z;
                    vol.v[cell * nt + t] = val;
                }
    return vol;
}

void write_nifti(const std::string& path, const Volume& vol, bool as_float32) {
    const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2], nt = vol.n_meas;
    size_t n_vals = static_cast<size_t>(nx) * ny * nz * nt;
    if (vol.v.size() != n_vals) throw ShapeError("write_nifti: volume size mismatch");

    std::vector<char> hdr(kHeaderSize + 4, 0);  // header + 4-byte extension pad
    auto put = [&](size_t off, const void* p, size_t n) { std::memcpy(hdr.data() + off, p, n); };
    int32_t sizeof_hdr = kHeaderSize;
    put(0, &sizeof_hdr, 4);
    int16_t dim[8] = {static_cast<int16_t>(nt > 1 ? 4 : 3), static_cast<int16_t>(nx),
                      static_cast<int16_t>(ny), static_cast<int16_t>(nz),
                      static_cast<int16_t>(nt), 1, 1, 1};
    put(40, dim, sizeof(dim));
    int16_t datatype = as_float32 ? kDtFloat32 : kDtFloat64;
    int16_t bitpix = as_float32 ? 32 : 64;
    put(70, &datatype, 2);
    put(72, &bitpix, 2);
    float pixdim[8] = {1, 1, 1, 1, 1, 1, 1, 1};
    put(76, pixdim, sizeof(pixdim));
    float vox_offset = kVoxOffset;
    put(108, &vox_offset, 4);
    float scl_slope = 1.0f;
    put(112, &scl_slope, 4);
    put(344, "n+1\0", 4);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write file: " + path);
    f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    std::vector<char> out(n_vals * (as_float32 ? 4 : 8));
    size_t idx = 0;
    for (int t = 0; t < nt; ++t)
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x, ++idx) {
                    size_t cell = (static_cast<size_t>(x) * ny + y) * nz + z;
                    double val = vol.v[cell * nt + t];
                    if (as_float32) {
                        float fv = static_cast<float>(val);
                        std::memcpy(out.data() + idx * 4, &fv, 4);
                    } else {
                        std::memcpy(out.data() + idx * 8, &val, 8);
                    }
                }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write: " + path);
}

Mask read_mask_nifti(const std::string& path) {
    Volume vol = read_nifti(path);
    if (vol.n_meas != 1) throw DataError("mask: expected a single measurement: " + path);
    Mask m;
    m.dims = vol.dims;
    m.inside.resize(vol.n_cells());
    for (size_t i = 0; i < vol.v.size(); ++i) m.inside[i] = vol.v[i] != 0.0 ? 1 : 0;
    m.validate();
    return m;
}

void write_mask_nifti(const std::string& path, const Mask& mask) {
    mask.validate();
    Volume vol;
    vol.dims = mask.dims;
    vol.n_meas = 1;
    vol.v.resize(mask.n_cells());
    for (size_t i = 0; i < vol.v.size(); ++i) vol.v[i] = mask.inside[i] ? 1.0 : 0.0;
    write_nifti(path, vol, true);
}

Protocol read_protocol_json(const std::string& path) {
    json j = load_json(path);
    if (!j.is_object()) throw DataError("protocol: expected a JSON object: " + path);
    Protocol prot;
    for (auto it = j.begin(); it != j.end(); ++it) {
        Protocol::Axis ax;
        ax.name = it.key();
        const json& v = it.value();
        if (!v.is_array() || v.empty())
            throw DataError("protocol: axis '" + ax.name + "' must be a non-empty array");
        if (v[0].is_array()) {
            int rows = static_cast<int>(v.size());
            int cols = static_cast<int>(v[0].size());
            ax.values = Matrix(rows, cols);
            for (int i = 0; i < rows; ++i) {
                if (!v[i].is_array() || static_cast<int>(v[i].size()) != cols)
                    throw DataError("protocol: ragged rows in axis '" + ax.name + "'");
                for (int k = 0; k < cols; ++k) {
                    if (!v[i][k].is_number())
                        throw DataError("protocol: non-numeric entry in axis '" + ax.name + "'");
                    ax.values(i, k) = v[i][k].get<double>();
                }
            }
        } else {
            ax.values = Matrix(1, static_cast<int>(v.size()));
            for (int k = 0; k < ax.values.cols; ++k) {
                if (!v[k].is_number())
                    throw DataError("protocol: non-numeric entry in axis '" + ax.name + "'");
                ax.values(0, k) = v[k].get<double>();
            }
        }
        prot.axes.push_back(std::move(ax));
    }
    prot.validate();
    return prot;
}

void write_protocol_json(const std::string& path, const Protocol& prot) {
    json j = json::object();
    for (const auto& ax : prot.axes) {
        if (ax.values.rows == 1) {
            j[ax.name] = ax.values.v;
        } else {
            json rows = json::array();
            for (int i = 0; i < ax.values.rows; ++i) {
                json row = json::array();
                for (int k = 0; k < ax.values.cols; ++k) row.push_back(ax.values(i, k));
                rows.push_back(std::move(row));
            }
            j[ax.name] = std::move(rows);
        }
    }
    std::ofstream f(path);
    if (!f) throw DataError("cannot write file: " + path);
    f << j.dump(2) << "\n";
}

NeighborGraph read_mesh_json(const std::string& path) {
    json j = load_json(path);
    if (!j.contains("n_vertices") || !j["n_vertices"].is_number_integer())
        throw DataError("mesh: missing integer 'n_vertices': " + path);
    int n = j["n_vertices"].get<int>();
    if (j.contains("faces")) {
        std::vector<std::array<int, 3>> faces;
        for (const auto& f : j["faces"]) {
            if (!f.is_array() || f.size() != 3)
                throw DataError("mesh: faces must be integer triples: " + path);
            faces.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
        }
        return mesh_graph(n, faces);
    }
    if (j.contains("edges")) {
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j["edges"]) {
            if (!e.is_array() || e.size() != 2)
                throw DataError("mesh: edges must be integer pairs: " + path);
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        return mesh_graph_edges(n, edges);
    }
    throw DataError("mesh: need 'faces' or 'edges': " + path);
}

ComplexArray read_complex64(const std::string& data_path, const std::string& sidecar_path) {
    json j = load_json(sidecar_path);
    if (!j.contains("shape") || !j["shape"].is_array() || j["shape"].size() != 4)
        throw DataError("complex sidecar: need \"shape\": [ky, kz, coil, echo]: " + sidecar_path);
    ComplexArray arr;
    size_t n = 1;
    for (int i = 0; i < 4; ++i) {
        arr.shape[i] = j["shape"][i].get<int>();
        if (arr.shape[i] < 1) throw DataError("complex sidecar: bad shape: " + sidecar_path);
        n *= static_cast<size_t>(arr.shape[i]);
    }
    std::vector<char> buf = read_file(data_path);
    if (buf.size() != n * 8)
        throw DataError("complex data: size does not match sidecar shape: " + data_path);
    arr.v.resize(n);
    for (size_t i = 0; i < n; ++i) {
        float re = get_le<float>(buf.data() + i * 8);
        float im = get_le<float>(buf.data() + i * 8 + 4);
        arr.v[i] = {static_cast<double>(re), static_cast<double>(im)};
    }
    return arr;
}

void write_complex64(const std::string& data_path, const std::string& sidecar_path,
                     const ComplexArray& arr) {
    size_t n = 1;
    for (int i = 0; i < 4; ++i) {
        if (arr.shape[i] < 1) throw ShapeError("write_complex64: bad shape");
        n *= static_cast<size_t>(arr.shape[i]);
    }
    if (arr.v.size() != n) throw ShapeError("write_complex64: data/shape mismatch");
    std::ofstream f(data_path, std::ios::binary);
    if (!f) throw DataError("cannot write file: " + data_path);
    std::vector<char> buf(n * 8);
    for (size_t i = 0; i < n; ++i) {
        float re = static_cast<float>(arr.v[i].real());
        float im = static_cast<float>(arr.v[i].imag());
        std::memcpy(buf.data() + i * 8, &re, 4);
        std::memcpy(buf.data() + i * 8 + 4, &im, 4);
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("short write: " + data_path);

    json j;
    j["shape"] = arr.shape;
    std::ofstream s(sidecar_path);
    if (!s) throw DataError("cannot write file: " + sidecar_path);
    s << j.dump(2) << "\n";
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write file: " + path);
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << "\n";
    char buf[40];
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw ShapeError("write_csv: row width mismatch");
        for (size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
            f << (i ? "," : "") << buf;
        }
        f << "\n";
    }
}

}  // namespace qfit
