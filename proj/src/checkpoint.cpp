#include "capepde/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "capepde/errors.hpp"

namespace capepde {

namespace {

constexpr char kMagic[6] = {'N', 'N', 'C', 'K', '1', '\0'};

template <typename T>
void put_le(std::string& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

struct Reader {
    const std::string& data;
    std::size_t pos = 0;
    void need(std::size_t n, const char* what) const {
        if (pos + n > data.size())
            throw FormatError(std::string("truncated checkpoint while reading ") + what, pos);
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

Tensor Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw DataError("checkpoint has no tensor named '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string out;
    out.append(kMagic, 6);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        out.append(reinterpret_cast<const char*>(t.value().data()),
                   static_cast<std::size_t>(t.numel()) * sizeof(double));
    }
    const std::string meta = ckpt.meta.dump();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out.append(meta);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
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
    if (version != 1) throw FormatError("unsupported version", 6);
    const auto n_tensors = r.get<std::uint32_t>("n_tensors");

    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const auto name_len = r.get<std::uint32_t>("name_len");
        r.need(name_len, "name");
        std::string name(data.data() + r.pos, name_len);
        r.pos += name_len;
        const auto rank = r.get<std::uint32_t>("rank");
        Shape shape(rank);
        std::int64_t count = 1;
        for (auto& d : shape) {
            d = static_cast<std::int64_t>(r.get<std::uint64_t>("dim"));
            count *= d;
        }
        r.need(static_cast<std::size_t>(count) * sizeof(double), "tensor data");
        std::vector<double> values(static_cast<std::size_t>(count));
        std::memcpy(values.data(), data.data() + r.pos, values.size() * sizeof(double));
        r.pos += values.size() * sizeof(double);
        ckpt.tensors.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    const auto json_len = r.get<std::uint32_t>("json_len");
    r.need(json_len, "meta json");
    const std::string meta(data.data() + r.pos, json_len);
    r.pos += json_len;
    if (r.pos != data.size()) throw FormatError("trailing bytes after metadata", r.pos);
    try {
        ckpt.meta = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid metadata json: ") + e.what(), data.size() - json_len);
    }
    return ckpt;
}

}  // namespace capepde
