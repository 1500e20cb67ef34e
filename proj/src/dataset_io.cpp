#include "capepde/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "capepde/errors.hpp"
#include "capepde/fft.hpp"

namespace capepde {

namespace {

constexpr char kMagic[6] = {'P', 'D', 'E', 'B', '1', '\0'};

void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(reinterpret_cast<const char*>(p), n);
}

template <typename T>
void put_le(std::string& out, T v) {
    // Serialized fields are fixed-width little-endian integers/doubles.
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    put_bytes(out, buf, sizeof(T));
}

struct Reader {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > data.size())
            throw FormatError(std::string("truncated file while reading ") + what, pos);
    }
    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, data.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
};

}  // namespace

void write_trajectory_set(const TrajectorySet& set, const std::string& path) {
    const std::int64_t n_traj = static_cast<std::int64_t>(set.items.size());
    const std::int64_t frames = set.grid.n_t + 1;
    std::string out;
    out.reserve(kPdebHeaderBytes +
                static_cast<std::size_t>(n_traj * frames * set.grid.n_x) * sizeof(double) +
                set.meta_json.size() + 4);
    put_bytes(out, kMagic, 6);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(set.params.kind));
    put_le<double>(out, set.params.value);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n_traj));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(frames));
    put_le<std::uint32_t>(out, 1);  // channels
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.grid.n_x));
    put_le<double>(out, set.grid.dt);
    put_le<double>(out, set.grid.dx());
    for (const auto& traj : set.items) {
        if (static_cast<std::int64_t>(traj.u.size()) != frames * set.grid.n_x)
            throw ShapeError("write_trajectory_set: trajectory size does not match grid");
        put_bytes(out, traj.u.data(), traj.u.size() * sizeof(double));
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.meta_json.size()));
    put_bytes(out, set.meta_json.data(), set.meta_json.size());

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for " + path);
}

TrajectorySet read_trajectory_set(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string data = ss.str();

    Reader r{data};
    r.need(6, "magic");
    if (std::memcmp(data.data(), kMagic, 6) != 0) throw FormatError("bad magic", 0);
    r.pos = 6;
    const auto version = r.get<std::uint16_t>("version");
    if (version != 1) throw FormatError("unsupported version " + std::to_string(version), 6);
    const auto kind = r.get<std::uint8_t>("kind");
    if (kind > 1) throw FormatError("unknown pde kind " + std::to_string(kind), 8);
    const double param = r.get<double>("param");
    const auto n_traj = r.get<std::uint32_t>("n_traj");
    const auto frames = r.get<std::uint32_t>("n_t_plus_1");
    const auto channels = r.get<std::uint32_t>("channels");
    const auto n_x = r.get<std::uint32_t>("n_x");
    const double dt = r.get<double>("dt");
    const double dx = r.get<double>("dx");
    if (channels != 1) throw FormatError("unsupported channel count", 23);
    if (frames < 2) throw FormatError("fewer than two frames", 27);
    if (!fft::is_pow2(n_x)) throw FormatError("n_x is not a power of two", 31);

    TrajectorySet set;
    set.params.kind = static_cast<PdeKind>(kind);
    set.params.value = param;
    set.grid.n_x = n_x;
    set.grid.n_t = static_cast<std::int64_t>(frames) - 1;
    set.grid.dt = dt;
    set.grid.length = dx * static_cast<double>(n_x);
    set.items.reserve(n_traj);
    const std::size_t frame_doubles = static_cast<std::size_t>(frames) * n_x;
    for (std::uint32_t i = 0; i < n_traj; ++i) {
        r.need(frame_doubles * sizeof(double), "trajectory data");
        Trajectory traj;
        traj.grid = set.grid;
        traj.params = set.params;
        traj.u.resize(frame_doubles);
        std::memcpy(traj.u.data(), data.data() + r.pos, frame_doubles * sizeof(double));
        r.pos += frame_doubles * sizeof(double);
        set.items.push_back(std::move(traj));
    }
    const auto json_len = r.get<std::uint32_t>("json_len");
    r.need(json_len, "metadata json");
    set.meta_json.assign(data.data() + r.pos, json_len);
    r.pos += json_len;
    if (r.pos != data.size()) throw FormatError("trailing bytes after metadata", r.pos);
    return set;
}

std::string dataset_file_name(PdeKind kind, double param, const std::string& split) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", param);
    return pde_kind_name(kind) + "_" + split + "_" + buf + ".pdeb1";
}

}  // namespace capepde
