#include "acr/mmio.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace acr {

namespace {

std::vector<Point2> grid_coords(int dim) {
    // Plane blocks come from an nx x nx plane; reconstruct lexicographic coords.
    const int nx = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
    std::vector<Point2> coords(dim);
    if (nx * nx == dim) {
        const double h = 1.0 / (nx + 1);
        for (int j = 0; j < nx; ++j)
            for (int i = 0; i < nx; ++i)
                coords[j * nx + i] = Point2{(i + 1) * h, (j + 1) * h};
    } else {
        for (int i = 0; i < dim; ++i) coords[i] = Point2{static_cast<double>(i), 0.0};
    }
    return coords;
}

} // namespace

void write_matrix_market(const PlaneBlock& block, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << block.dim() << " " << block.dim() << " " << block.entries().size() << "\n";
    out << std::setprecision(17);
    for (const auto& e : block.entries())
        out << e.row + 1 << " " << e.col + 1 << " " << e.value << "\n";
}

PlaneBlock read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw Error("not a Matrix Market file: " + path);
    do {
        if (!std::getline(in, line)) throw Error("truncated Matrix Market file: " + path);
    } while (!line.empty() && line[0] == '%');

    std::istringstream hdr(line);
    int rows = 0, cols = 0;
    long nnz = 0;
    hdr >> rows >> cols >> nnz;
    if (rows != cols || rows <= 0) throw Error("plane blocks must be square: " + path);

    std::vector<Entry> entries;
    entries.reserve(nnz);
    for (long k = 0; k < nnz; ++k) {
        int r, c;
        double v;
        if (!(in >> r >> c >> v)) throw Error("truncated entries in: " + path);
        entries.push_back(Entry{r - 1, c - 1, v});
    }
    return PlaneBlock(rows, std::move(entries), grid_coords(rows));
}

void write_plane_vector(const Eigen::VectorXd& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << std::setprecision(17);
    for (long i = 0; i < v.size(); ++i) out << v[i] << "\n";
}

Eigen::VectorXd read_plane_vector(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path);
    std::vector<double> vals;
    double x;
    while (in >> x) vals.push_back(x);
    Eigen::VectorXd v(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
    return v;
}

void write_system(const BlockTridiagonalSystem& system, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const int n = system.plane_count();
    for (int j = 0; j < n; ++j) {
        write_matrix_market(system.D(j), dir + "/D_" + std::to_string(j) + ".mtx");
        write_plane_vector(system.f(j), dir + "/f_" + std::to_string(j) + ".txt");
    }
    for (int j = 1; j < n; ++j)
        write_matrix_market(system.E(j), dir + "/E_" + std::to_string(j) + ".mtx");
    for (int j = 0; j < n - 1; ++j)
        write_matrix_market(system.F(j), dir + "/F_" + std::to_string(j) + ".mtx");
}

BlockTridiagonalSystem read_system(const std::string& dir, int plane_count) {
    std::vector<PlaneBlock> D, E, F;
    std::vector<Eigen::VectorXd> f;
    for (int j = 0; j < plane_count; ++j) {
        D.push_back(read_matrix_market(dir + "/D_" + std::to_string(j) + ".mtx"));
        f.push_back(read_plane_vector(dir + "/f_" + std::to_string(j) + ".txt"));
    }
    for (int j = 1; j < plane_count; ++j)
        E.push_back(read_matrix_market(dir + "/E_" + std::to_string(j) + ".mtx"));
    for (int j = 0; j < plane_count - 1; ++j)
        F.push_back(read_matrix_market(dir + "/F_" + std::to_string(j) + ".mtx"));
    return BlockTridiagonalSystem(std::move(D), std::move(E), std::move(F), std::move(f));
}

} // namespace acr
