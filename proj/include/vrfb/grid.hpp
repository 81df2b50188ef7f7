/// @file grid.hpp
/// @brief Structured hexahedral grid of the two-layer half-cell: a porous
///        electrode slab (z in [0, t_e]) with the flow-field design layer
///        stacked on top (z in [t_e, t_e + t_c]).
///
/// Spacing is uniform in x and y and uniform within each z layer; the two
/// layers may use different sublayer thicknesses. The grid is immutable
/// after construction and safe to share across threads.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vrfb/config.hpp"

namespace vrfb {

enum class Region : uint8_t { Electrode, DesignLayer };

enum class Patch : uint8_t { Interior, Inlet, Outlet, CollectorWall, MembraneWall, SideWall };

class Grid {
public:
    Grid(const CaseConfig& cfg);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    int nz_electrode() const { return nze_; }
    int nz_channel() const { return nzc_; }

    double length() const { return L_; }
    double width() const { return W_; }
    double electrode_thickness() const { return te_; }
    double channel_thickness() const { return tc_; }

    double hx() const { return hx_; }
    double hy() const { return hy_; }
    /// Cell thickness of z-layer k.
    double dz(int k) const { return k < nze_ ? hze_ : hzc_; }
    /// z coordinate of the cell center in layer k.
    double zc(int k) const {
        return k < nze_ ? (k + 0.5) * hze_ : te_ + (k - nze_ + 0.5) * hzc_;
    }
    double xc(int i) const { return (i + 0.5) * hx_; }
    double yc(int j) const { return (j + 0.5) * hy_; }
    bool uniform_z() const { return hze_ == hzc_; }

    // --- cells ---
    int ncells() const { return nx_ * ny_ * nz_; }
    int cell(int i, int j, int k) const { return i + nx_ * (j + ny_ * k); }
    void cell_ijk(int c, int& i, int& j, int& k) const {
        i = c % nx_;
        j = (c / nx_) % ny_;
        k = c / (nx_ * ny_);
    }
    Region region(int c) const { return region_k(c / (nx_ * ny_)); }
    Region region_k(int k) const { return k < nze_ ? Region::Electrode : Region::DesignLayer; }
    double cell_volume(int c) const { return hx_ * hy_ * dz(c / (nx_ * ny_)); }
    int n_electrode_cells() const { return nx_ * ny_ * nze_; }
    int n_design_cells() const { return nx_ * ny_ * nzc_; }
    /// Linear index of a design cell within the design layer (0-based), or -1.
    int design_index(int c) const {
        const int k = c / (nx_ * ny_);
        return k >= nze_ ? c - nx_ * ny_ * nze_ : -1;
    }
    /// Global cell id of design cell d.
    int design_cell(int d) const { return d + nx_ * ny_ * nze_; }
    /// Electrode cells use the same layout trick: electrode index == cell id.
    int electrode_index(int c) const { return c < nx_ * ny_ * nze_ ? c : -1; }

    // --- faces (x-faces carry u, y-faces v, z-faces w) ---
    int nfx() const { return (nx_ + 1) * ny_ * nz_; }
    int nfy() const { return nx_ * (ny_ + 1) * nz_; }
    int nfz() const { return nx_ * ny_ * (nz_ + 1); }
    int fx(int i, int j, int k) const { return i + (nx_ + 1) * (j + ny_ * k); }
    int fy(int i, int j, int k) const { return i + nx_ * (j + (ny_ + 1) * k); }
    int fz(int i, int j, int k) const { return i + nx_ * (j + ny_ * k); }
    double ax(int k) const { return hy_ * dz(k); }  // x-face area in layer k
    double ay(int k) const { return hx_ * dz(k); }  // y-face area in layer k
    double az() const { return hx_ * hy_; }         // z-face area

    /// Patch of an x-face (Interior for internal faces).
    Patch patch_fx(int i, int j, int k) const {
        if (i > 0 && i < nx_) return Patch::Interior;
        const bool layer_ok = full_span_ || region_k(k) == Region::DesignLayer;
        if (layer_ok && in_inlet_band(j)) return i == 0 ? Patch::Inlet : Patch::Outlet;
        return Patch::SideWall;
    }
    Patch patch_fy(int /*i*/, int j, int /*k*/) const {
        return (j == 0 || j == ny_) ? Patch::SideWall : Patch::Interior;
    }
    Patch patch_fz(int /*i*/, int /*j*/, int k) const {
        if (k == 0) return Patch::MembraneWall;
        if (k == nz_) return Patch::CollectorWall;
        return Patch::Interior;
    }
    bool in_inlet_band(int j) const { return j >= band_j0_ && j < band_j1_; }
    int band_j0() const { return band_j0_; }
    int band_j1() const { return band_j1_; }

    /// Total boundary area; closed-surface identity 2(LW + L t + W t).
    double boundary_area() const;

private:
    int nx_, ny_, nze_, nzc_, nz_;
    double L_, W_, te_, tc_;
    double hx_, hy_, hze_, hzc_;
    int band_j0_, band_j1_;
    bool full_span_ = false;
};

} // namespace vrfb
