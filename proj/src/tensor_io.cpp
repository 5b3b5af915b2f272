#include "aidi/tensor_io.hpp"

#include "aidi/csv.hpp"
#include "aidi/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace aidi {

namespace {

constexpr std::array<char, 8> kMagic{'A', 'I', 'D', 'I', 'F', '3', '2', '\0'};

std::string strip_comment(std::string line) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    return line;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

// Line reader that skips comments and blank lines.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& out) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            line = strip_comment(line);
            if (!blank(line)) {
                out = line;
                return true;
            }
        }
        return false;
    }
    int line_no() const { return line_no_; }

private:
    std::istream& in_;
    int line_no_ = 0;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Splits "key: value"; returns false when the line has no colon.
bool split_header(const std::string& line, std::string& key, std::string& value) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) return false;
    key = trim(line.substr(0, colon));
    value = trim(line.substr(colon + 1));
    return true;
}

Shape parse_shape(const std::string& value, int line_no) {
    std::istringstream ss(value);
    Shape shape;
    long long d;
    while (ss >> d) {
        if (d <= 0) throw IoError("line " + std::to_string(line_no) + ": shape dims must be positive");
        shape.push_back(static_cast<std::size_t>(d));
    }
    if (!ss.eof() || shape.empty()) throw IoError("line " + std::to_string(line_no) + ": malformed shape");
    return shape;
}

double parse_real(const std::string& tok, int line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tok.size()) throw IoError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    return v;
}

Latent read_block(LineReader& reader) {
    std::string line, key, value;
    if (!reader.next(line) || !split_header(line, key, value) || key != "shape")
        throw IoError("line " + std::to_string(reader.line_no()) + ": expected 'shape: d1 d2 ...'");
    Shape shape = parse_shape(value, reader.line_no());
    const std::size_t n = shape_size(shape);
    std::vector<double> data;
    data.reserve(n);
    while (data.size() < n) {
        if (!reader.next(line))
            throw IoError("tensor ended after " + std::to_string(data.size()) + " of " + std::to_string(n) + " values");
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            if (data.size() == n) throw IoError("line " + std::to_string(reader.line_no()) + ": too many values");
            data.push_back(parse_real(tok, reader.line_no()));
        }
    }
    Latent t(std::move(shape), std::move(data));
    if (!t.all_finite()) throw IoError("tensor contains non-finite values");
    return t;
}

void write_block(const Latent& t, std::ostream& out) {
    out << "shape:";
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    const std::size_t row = t.shape().back();
    for (std::size_t i = 0; i < t.size(); ++i) {
        out << format_real(t[i], 17);
        out << ((i + 1) % row == 0 ? '\n' : ' ');
    }
}

template <class T>
void put_le(std::ostream& out, T v) {
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    out.write(buf.data(), buf.size());
}

template <class T>
T get_le(std::istream& in) {
    std::array<char, sizeof(T)> buf;
    if (!in.read(buf.data(), buf.size())) throw IoError("binary tensor truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    return v;
}

Latent as_latent(const DenseMatrix& m) { return Latent({m.rows, m.cols}, m.data); }

DenseMatrix as_matrix(const Latent& t, const std::string& name) {
    if (t.shape().size() != 2) throw IoError("tensor " + name + " must be 2-D");
    return DenseMatrix(t.shape()[0], t.shape()[1], std::vector<double>(t.values().begin(), t.values().end()));
}

std::vector<double> as_vector(const Latent& t, const std::string& name) {
    if (t.shape().size() != 1) throw IoError("tensor " + name + " must be 1-D");
    return {t.values().begin(), t.values().end()};
}

}  // namespace

Latent read_tensor_text(std::istream& in) {
    LineReader reader(in);
    return read_block(reader);
}

void write_tensor_text(const Latent& t, std::ostream& out) { write_block(t, out); }

Latent read_tensor_binary(std::istream& in) {
    std::array<char, 8> magic;
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not a binary tensor file");
    const auto rank = get_le<std::uint32_t>(in);
    if (rank == 0 || rank > 16) throw IoError("binary tensor: bad rank");
    Shape shape(rank);
    for (auto& d : shape) {
        d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
        if (d == 0) throw IoError("binary tensor: zero dimension");
    }
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = static_cast<double>(get_le<float>(in));
    Latent t(std::move(shape), std::move(data));
    if (!t.all_finite()) throw IoError("tensor contains non-finite values");
    return t;
}

void write_tensor_binary(const Latent& t, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.values()) put_le<float>(out, static_cast<float>(v));
}

Latent load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file " + path.string());
    std::array<char, 8> head{};
    in.read(head.data(), head.size());
    const bool binary = in.gcount() == 8 && head == kMagic;
    in.clear();
    in.seekg(0);
    try {
        return binary ? read_tensor_binary(in) : read_tensor_text(in);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void save_tensor(const Latent& t, const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write tensor file " + path.string());
    if (binary)
        write_tensor_binary(t, out);
    else
        write_tensor_text(t, out);
    if (!out) throw IoError("failed writing " + path.string());
}

AttentionMap load_attention(const std::filesystem::path& path) {
    const Latent t = load_tensor(path);
    AttentionMap map;
    map.provenance = AttentionProvenance::File;
    if (t.shape().size() == 1) {
        map.grid = Grid(1, t.shape()[0], {t.values().begin(), t.values().end()});
    } else if (t.shape().size() == 2) {
        map.grid = Grid(t.shape()[0], t.shape()[1], {t.values().begin(), t.values().end()});
    } else {
        throw IoError(path.string() + ": attention map must be 1-D or 2-D");
    }
    map.validate();
    return map;
}

std::unique_ptr<NoisePredictor> read_predictor(std::istream& in) {
    LineReader reader(in);
    std::string line, key, value, kind;
    std::map<std::string, std::string> params;
    std::map<std::string, Latent> tensors;
    while (reader.next(line)) {
        if (!split_header(line, key, value))
            throw IoError("line " + std::to_string(reader.line_no()) + ": expected 'key: value'");
        if (key == "predictor") {
            kind = value;
        } else if (key == "tensor") {
            if (tensors.count(value)) throw IoError("duplicate tensor '" + value + "'");
            tensors.emplace(value, read_block(reader));
        } else {
            params[key] = value;
        }
    }
    auto param = [&](const std::string& k) -> double {
        auto it = params.find(k);
        if (it == params.end()) throw IoError("predictor file: missing '" + k + "'");
        return parse_real(it->second, 0);
    };
    auto tensor = [&](const std::string& k) -> const Latent& {
        auto it = tensors.find(k);
        if (it == tensors.end()) throw IoError("predictor file: missing tensor '" + k + "'");
        return it->second;
    };

    if (kind == "zero") return std::make_unique<ZeroPredictor>();
    if (kind == "constant") {
        if (params.count("value")) return std::make_unique<ConstantPredictor>(param("value"));
        return std::make_unique<ConstantPredictor>(
            std::array<double, 3>{param("value.null"), param("value.source"), param("value.target")});
    }
    if (kind == "affine") {
        std::array<DenseMatrix, 3> a;
        std::array<std::vector<double>, 3> b;
        for (auto p : kAllPrompts) {
            const std::string n(to_string(p));
            a[index(p)] = as_matrix(tensor("A." + n), "A." + n);
            if (tensors.count("b." + n)) b[index(p)] = as_vector(tensor("b." + n), "b." + n);
        }
        const double bound = params.count("bound") ? param("bound") : -1.0;
        return std::make_unique<AffinePredictor>(std::move(a), std::move(b), bound);
    }
    if (kind == "contractive") {
        std::array<DenseMatrix, 3> w;
        for (auto p : kAllPrompts) {
            const std::string n(to_string(p));
            w[index(p)] = as_matrix(tensor("W." + n), "W." + n);
        }
        return std::make_unique<ContractiveNonlinearPredictor>(param("scale"), std::move(w));
    }
    throw IoError("predictor file: unknown or missing kind '" + kind + "'");
}

std::unique_ptr<NoisePredictor> load_predictor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open predictor file " + path.string());
    try {
        return read_predictor(in);
    } catch (const Error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_predictor(const NoisePredictor& pred, std::ostream& out) {
    out << "predictor: " << pred.kind() << '\n';
    if (dynamic_cast<const ZeroPredictor*>(&pred)) return;
    if (const auto* c = dynamic_cast<const ConstantPredictor*>(&pred)) {
        for (auto p : kAllPrompts) out << "value." << to_string(p) << ": " << format_real(c->value(p), 17) << '\n';
        return;
    }
    if (const auto* a = dynamic_cast<const AffinePredictor*>(&pred)) {
        for (auto p : kAllPrompts) {
            out << "tensor: A." << to_string(p) << '\n';
            write_block(as_latent(a->matrix(p)), out);
            out << "tensor: b." << to_string(p) << '\n';
            write_block(Latent({a->offset(p).size()}, a->offset(p)), out);
        }
        return;
    }
    if (const auto* c = dynamic_cast<const ContractiveNonlinearPredictor*>(&pred)) {
        out << "scale: " << format_real(c->scale(), 17) << '\n';
        for (auto p : kAllPrompts) {
            out << "tensor: W." << to_string(p) << '\n';
            write_block(as_latent(c->weights(p)), out);
        }
        return;
    }
    throw ConfigError("write_predictor: unsupported predictor kind '" + std::string(pred.kind()) + "'");
}

void save_predictor(const NoisePredictor& pred, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write predictor file " + path.string());
    write_predictor(pred, out);
}

}  // namespace aidi
