// Shared helpers for the unit tests: small case builders and a minimal
// legacy-VTK reader used to round-trip exported files.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vrfb/config.hpp"

namespace testutil {

inline vrfb::CaseConfig small_case(int nx, int ny, int nze, int nzc) {
    vrfb::CaseConfig cfg;
    cfg.nx = nx;
    cfg.ny = ny;
    cfg.nz_electrode = nze;
    cfg.nz_channel = nzc;
    return cfg;
}

struct VtkData {
    std::string dataset; // STRUCTURED_POINTS or RECTILINEAR_GRID
    int dims[3] = {0, 0, 0};
    int ncells = 0;
    std::map<std::string, std::vector<double>> fields;
};

inline double swap_be(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    bits = __builtin_bswap64(bits);
    std::memcpy(&v, &bits, 8);
    return v;
}

// Reads the writer's legacy dialect (ASCII or BINARY, cell data only).
inline VtkData read_vtk(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    VtkData out;
    std::string line;
    std::getline(in, line); // header
    std::getline(in, line); // title
    std::getline(in, line);
    const bool binary = line == "BINARY";
    std::getline(in, line); // DATASET ...
    {
        std::istringstream ss(line);
        std::string kw;
        ss >> kw >> out.dataset;
    }

    auto read_values = [&](size_t n) {
        std::vector<double> vals(n);
        if (binary) {
            in.read(reinterpret_cast<char*>(vals.data()), n * 8);
            for (double& v : vals) v = swap_be(v);
            in.get(); // trailing newline
        } else {
            for (size_t i = 0; i < n; ++i) in >> vals[i];
            in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        }
        return vals;
    };

    std::string tok;
    while (in >> tok) {
        if (tok == "DIMENSIONS") {
            in >> out.dims[0] >> out.dims[1] >> out.dims[2];
        } else if (tok == "ORIGIN" || tok == "SPACING") {
            double a, b, c;
            in >> a >> b >> c;
        } else if (tok == "X_COORDINATES" || tok == "Y_COORDINATES" || tok == "Z_COORDINATES") {
            int n;
            std::string type;
            in >> n >> type;
            in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
            read_values(n);
        } else if (tok == "CELL_DATA") {
            in >> out.ncells;
        } else if (tok == "SCALARS") {
            std::string name, type;
            int comps;
            in >> name >> type >> comps;
            in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
            std::getline(in, line); // LOOKUP_TABLE default
            out.fields[name] = read_values(static_cast<size_t>(out.ncells));
        } else if (tok == "VECTORS") {
            std::string name, type;
            in >> name >> type;
            in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
            out.fields[name] = read_values(static_cast<size_t>(out.ncells) * 3);
        }
    }
    return out;
}

} // namespace testutil
