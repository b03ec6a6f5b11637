#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "qfit/volume.hpp"

namespace qfit {

// Single-file uncompressed little-endian NIfTI-1, float32 or float64, with
// dim[0..4], datatype, bitpix, vox_offset honored and everything else
// defaulted. Volume axes are (x, y, z) with measurements as the 4th dim;
// on disk x varies fastest, in memory the measurement index does.
Volume read_nifti(const std::string& path);
void write_nifti(const std::string& path, const Volume& vol, bool as_float32 = false);

// Nonzero voxels are inside; the file must have a single measurement.
Mask read_mask_nifti(const std::string& path);
void write_mask_nifti(const std::string& path, const Mask& mask);

// JSON object of named numeric arrays. A flat array becomes a (1 x m) axis;
// an array of arrays becomes (n_samples x m).
Protocol read_protocol_json(const std::string& path);
void write_protocol_json(const std::string& path, const Protocol& prot);

// JSON with "n_vertices" plus "faces" (triangles) or "edges".
NeighborGraph read_mesh_json(const std::string& path);

// Raw interleaved complex64 (float32 re, float32 im) with a JSON sidecar
// {"shape": [ky, kz, coil, echo]}. Values are stored row-major over that
// shape (echo index fastest).
struct ComplexArray {
    std::array<int, 4> shape{0, 0, 0, 0};  // ky, kz, coil, echo
    std::vector<std::complex<double>> v;   // row-major over shape
};
ComplexArray read_complex64(const std::string& data_path, const std::string& sidecar_path);
void write_complex64(const std::string& data_path, const std::string& sidecar_path,
                     const ComplexArray& arr);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace qfit
