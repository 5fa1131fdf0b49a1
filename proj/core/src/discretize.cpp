#include "acr/discretize.hpp"

#include <cmath>
#include <numbers>

namespace acr {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Point2> plane_coords(int n) {
    const double h = 1.0 / (n + 1);
    std::vector<Point2> coords(static_cast<size_t>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            coords[static_cast<size_t>(j) * n + i] = Point2{(i + 1) * h, (j + 1) * h};
    return coords;
}

int plane_index(int n, int i, int j) { return j * n + i; }

} // namespace

ProblemKind parse_problem_kind(const std::string& name) {
    if (name == "poisson") return ProblemKind::Poisson;
    if (name == "convdiff") return ProblemKind::ConvDiff;
    if (name == "helmholtz") return ProblemKind::Helmholtz;
    throw UsageError("unknown problem kind: " + name);
}

std::string problem_kind_name(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::Poisson: return "poisson";
        case ProblemKind::ConvDiff: return "convdiff";
        case ProblemKind::Helmholtz: return "helmholtz";
    }
    return "?";
}

double helmholtz_kappa_for(int n) {
    // 2*pi*n/kappa ~ 12 points per wavelength
    return n / 2.0;
}

BlockTridiagonalSystem assemble_poisson(int n) {
    GridSpec grid(n);
    const double h = grid.spacing();
    const int m = grid.plane_size();
    const auto coords = plane_coords(n);

    std::vector<Entry> d_entries;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int r = plane_index(n, i, j);
            d_entries.push_back(Entry{r, r, 6.0});
            if (i > 0) d_entries.push_back(Entry{r, plane_index(n, i - 1, j), -1.0});
            if (i < n - 1) d_entries.push_back(Entry{r, plane_index(n, i + 1, j), -1.0});
            if (j > 0) d_entries.push_back(Entry{r, plane_index(n, i, j - 1), -1.0});
            if (j < n - 1) d_entries.push_back(Entry{r, plane_index(n, i, j + 1), -1.0});
        }
    PlaneBlock D(m, d_entries, coords);

    std::vector<Entry> id_entries;
    for (int r = 0; r < m; ++r) id_entries.push_back(Entry{r, r, -1.0});
    PlaneBlock negI(m, id_entries, coords);

    std::vector<PlaneBlock> Ds(n, D), Es(n - 1, negI), Fs(n - 1, negI);
    std::vector<Eigen::VectorXd> f(n, Eigen::VectorXd::Constant(m, h * h));
    return BlockTridiagonalSystem(std::move(Ds), std::move(Es), std::move(Fs), std::move(f));
}

ConvDiffProblem assemble_convdiff(int n, double alpha, double a) {
    if (alpha < 0) throw UsageError("assemble_convdiff: alpha must be nonnegative");
    GridSpec grid(n);
    const double h = grid.spacing();
    const int m = grid.plane_size();
    const auto coords = plane_coords(n);

    std::vector<std::vector<Entry>> Dent(n), Eent(n), Fent(n);
    for (int z = 0; z < n; ++z) {
        auto& de = Dent[z];
        auto& ee = Eent[z];
        auto& fe = Fent[z];
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const int r = plane_index(n, i, j);
                const double x = (i + 1) * h, y = (j + 1) * h, zc = (z + 1) * h;

                // diffusion, 7-point star scaled by h^2
                de.push_back(Entry{r, r, 6.0});
                if (i > 0) de.push_back(Entry{r, plane_index(n, i - 1, j), -1.0});
                if (i < n - 1) de.push_back(Entry{r, plane_index(n, i + 1, j), -1.0});
                if (j > 0) de.push_back(Entry{r, plane_index(n, i, j - 1), -1.0});
                if (j < n - 1) de.push_back(Entry{r, plane_index(n, i, j + 1), -1.0});
                ee.push_back(Entry{r, r, -1.0});
                fe.push_back(Entry{r, r, -1.0});

                if (alpha == 0.0) continue;

                // vortex field, three components
                const double t = 2.0 * kPi * a;
                const double b1 = std::sin(t * x) * std::sin(t * (0.125 + y)) +
                                  std::sin(t * (0.125 + zc)) * std::sin(t * x);
                const double b2 = std::cos(t * x) * std::cos(t * (0.125 + y)) +
                                  std::cos(t * (0.125 + y)) * std::cos(t * zc);
                const double b3 = std::cos(t * x) * std::cos(t * (0.125 + zc)) +
                                  std::sin(t * (0.125 + y)) * std::sin(t * zc);

                // upwind first differences, scaled by h^2: coefficient alpha*h*b_d
                auto upwind = [&](double bd, int lo_col, bool lo_in, int hi_col, bool hi_in,
                                  std::vector<Entry>* lo_vec, std::vector<Entry>* hi_vec) {
                    const double c = alpha * h * bd;
                    if (c == 0.0) return;
                    if (bd > 0) {
                        de.push_back(Entry{r, r, c});
                        if (lo_in) lo_vec->push_back(Entry{r, lo_col, -c});
                    } else {
                        de.push_back(Entry{r, r, -c});
                        if (hi_in) hi_vec->push_back(Entry{r, hi_col, c});
                    }
                };
                upwind(b1, plane_index(n, i - 1, j), i > 0, plane_index(n, i + 1, j),
                       i < n - 1, &de, &de);
                upwind(b2, plane_index(n, i, j - 1), j > 0, plane_index(n, i, j + 1),
                       j < n - 1, &de, &de);
                upwind(b3, r, z > 0, r, z < n - 1, &ee, &fe);
            }
    }

    std::vector<PlaneBlock> Ds, Es, Fs;
    for (int z = 0; z < n; ++z) Ds.emplace_back(m, Dent[z], coords);
    for (int z = 1; z < n; ++z) Es.emplace_back(m, Eent[z], coords);
    for (int z = 0; z < n - 1; ++z) Fs.emplace_back(m, Fent[z], coords);

    // reference solution sampled on the grid
    std::vector<PlaneVector> exact(n);
    for (int z = 0; z < n; ++z) {
        Eigen::VectorXd u(m);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double x = (i + 1) * h, y = (j + 1) * h, zc = (z + 1) * h;
                u[plane_index(n, i, j)] =
                    std::sin(kPi * x) + std::sin(kPi * y) + std::sin(kPi * zc) +
                    std::sin(3 * kPi * x) + std::sin(3 * kPi * y) + std::sin(3 * kPi * zc);
            }
        exact[z] = PlaneVector{std::move(u), z};
    }

    std::vector<Eigen::VectorXd> f(n, Eigen::VectorXd::Zero(m));
    BlockTridiagonalSystem system(std::move(Ds), std::move(Es), std::move(Fs), std::move(f));
    auto rhs_planes = acr::apply(system, exact);
    std::vector<Eigen::VectorXd> rhs(n);
    for (int z = 0; z < n; ++z) rhs[z] = rhs_planes[z].values;

    BlockTridiagonalSystem out(
        [&] {
            std::vector<PlaneBlock> v;
            for (int z = 0; z < n; ++z) v.push_back(system.D(z));
            return v;
        }(),
        [&] {
            std::vector<PlaneBlock> v;
            for (int z = 1; z < n; ++z) v.push_back(system.E(z));
            return v;
        }(),
        [&] {
            std::vector<PlaneBlock> v;
            for (int z = 0; z < n - 1; ++z) v.push_back(system.F(z));
            return v;
        }(),
        std::move(rhs));
    return ConvDiffProblem{std::move(out), std::move(exact)};
}

BlockTridiagonalSystem assemble_helmholtz(int n, double kappa) {
    GridSpec grid(n);
    const double h = grid.spacing();
    const int m = grid.plane_size();
    const auto coords = plane_coords(n);

    // 1D stiffness and consistent mass stencils for linear elements
    const double k1[3] = {-1.0 / h, 2.0 / h, -1.0 / h};
    const double m1[3] = {h / 6.0, 4.0 * h / 6.0, h / 6.0};

    // 27-point tensor weights of K - kappa^2 M over offsets {-1,0,1}^3
    double w[3][3][3];
    for (int dz = 0; dz < 3; ++dz)
        for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx)
                w[dx][dy][dz] = k1[dx] * m1[dy] * m1[dz] + m1[dx] * k1[dy] * m1[dz] +
                                m1[dx] * m1[dy] * k1[dz] -
                                kappa * kappa * m1[dx] * m1[dy] * m1[dz];

    std::vector<Entry> de, ee, fe;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int r = plane_index(n, i, j);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ii = i + dx, jj = j + dy;
                    if (ii < 0 || ii >= n || jj < 0 || jj >= n) continue;
                    const int c = plane_index(n, ii, jj);
                    de.push_back(Entry{r, c, w[dx + 1][dy + 1][1]});
                    ee.push_back(Entry{r, c, w[dx + 1][dy + 1][0]});
                    fe.push_back(Entry{r, c, w[dx + 1][dy + 1][2]});
                }
        }
    PlaneBlock D(m, de, coords), E(m, ee, coords), F(m, fe, coords);

    std::vector<PlaneBlock> Ds(n, D), Es(n - 1, E), Fs(n - 1, F);
    std::vector<Eigen::VectorXd> f(n, Eigen::VectorXd::Constant(m, h * h * h));
    return BlockTridiagonalSystem(std::move(Ds), std::move(Es), std::move(Fs), std::move(f));
}

BlockTridiagonalSystem assemble(const ProblemSpec& spec) {
    switch (spec.kind) {
        case ProblemKind::Poisson: return assemble_poisson(spec.n);
        case ProblemKind::ConvDiff: return assemble_convdiff(spec.n, spec.alpha, spec.a).system;
        case ProblemKind::Helmholtz:
            return assemble_helmholtz(spec.n,
                                      spec.kappa > 0 ? spec.kappa : helmholtz_kappa_for(spec.n));
    }
    throw UsageError("assemble: invalid problem kind");
}

PlaneBlock poisson2d_block(int n) {
    GridSpec grid(n);
    const int m = grid.plane_size();
    const auto coords = plane_coords(n);
    std::vector<Entry> entries;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int r = plane_index(n, i, j);
            entries.push_back(Entry{r, r, 4.0});
            if (i > 0) entries.push_back(Entry{r, plane_index(n, i - 1, j), -1.0});
            if (i < n - 1) entries.push_back(Entry{r, plane_index(n, i + 1, j), -1.0});
            if (j > 0) entries.push_back(Entry{r, plane_index(n, i, j - 1), -1.0});
            if (j < n - 1) entries.push_back(Entry{r, plane_index(n, i, j + 1), -1.0});
        }
    return PlaneBlock(m, std::move(entries), coords);
}

double poisson_series_solution(double x, double y, double z, int terms) {
    double u = 0.0;
    for (int i = 1; i <= terms; i += 2)
        for (int j = 1; j <= terms; j += 2)
            for (int k = 1; k <= terms; k += 2) {
                const double coef =
                    64.0 / (std::pow(kPi, 5) * i * j * k *
                            (static_cast<double>(i) * i + static_cast<double>(j) * j +
                             static_cast<double>(k) * k));
                u += coef * std::sin(i * kPi * x) * std::sin(j * kPi * y) *
                     std::sin(k * kPi * z);
            }
    return u;
}

} // namespace acr
