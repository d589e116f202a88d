#pragma once
// Versioned binary model container:
//   magic "ACDM" | u32 version | u64 header length | header JSON (UTF-8)
//   | u64 column count | normalization means | stds (f64 LE each)
//   | u64 tensor count | per tensor: u64 name length, name, u64 rows,
//     u64 cols, row-major f64 LE data.
// All doubles are written as little-endian IEEE-754 bit patterns, so a
// save/load round trip is bit-exact.
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "accdet/data/types.hpp"
#include "accdet/nn/params.hpp"

namespace accdet {

constexpr std::uint32_t kModelFormatVersion = 1;
constexpr char kModelMagic[4] = {'A', 'C', 'D', 'M'};

struct ModelFile {
    nlohmann::json header;  // architecture, seed, hyperparameters, dataset config
    NormalizationStats stats;
    NetworkParams params;
};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    require(in.good(), "model file: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    require(in.good(), "model file: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, static_cast<std::uint64_t>(m.rows()));
    write_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

}  // namespace detail

inline NetworkShape shape_from_header(const nlohmann::json& header) {
    NetworkShape shape;
    shape.encoder = encoder_kind_from_string(header.at("encoder").get<std::string>());
    shape.input_size = header.at("input_size").get<Index>();
    shape.encoder_output_dim = header.at("encoder_output_dim").get<Index>();
    shape.hidden_dims = header.at("hidden_dims").get<std::vector<Index>>();
    shape.leaky_slope = header.at("leaky_slope").get<double>();
    shape.dropout_rate = header.at("dropout_rate").get<double>();
    return shape;
}

inline nlohmann::json header_from_shape(const NetworkShape& shape) {
    return {{"format_version", kModelFormatVersion},
            {"encoder", to_string(shape.encoder)},
            {"input_size", shape.input_size},
            {"encoder_output_dim", shape.encoder_output_dim},
            {"hidden_dims", shape.hidden_dims},
            {"leaky_slope", shape.leaky_slope},
            {"dropout_rate", shape.dropout_rate}};
}

inline void save_model(const std::string& path, const ModelFile& model) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write model file '", path, "'");
    out.write(kModelMagic, 4);
    detail::write_u32(out, kModelFormatVersion);
    const std::string header = model.header.dump();
    detail::write_u64(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    detail::write_u64(out, static_cast<std::uint64_t>(model.stats.mean.size()));
    for (Index i = 0; i < model.stats.mean.size(); ++i) detail::write_f64(out, model.stats.mean(i));
    for (Index i = 0; i < model.stats.std.size(); ++i) detail::write_f64(out, model.stats.std(i));

    std::uint64_t tensor_count = 0;
    visit_tensors(const_cast<NetworkParams&>(model.params),
                  [&](const std::string&, Matrix&, Index) { ++tensor_count; });
    detail::write_u64(out, tensor_count);
    visit_tensors(const_cast<NetworkParams&>(model.params),
                  [&](const std::string& name, Matrix& m, Index) { detail::write_matrix(out, name, m); });
    require(out.good(), "model file: write failed for '", path, "'");
}

inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open model file '", path, "'");
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::equal(magic, magic + 4, kModelMagic), "model file '", path, "': bad magic");
    const std::uint32_t version = detail::read_u32(in);
    require(version == kModelFormatVersion, "model file '", path, "': format version ", version, ", expected ",
            kModelFormatVersion);

    ModelFile model;
    const std::uint64_t header_len = detail::read_u64(in);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    require(in.good(), "model file '", path, "': truncated header");
    model.header = nlohmann::json::parse(header);

    const std::uint64_t cols = detail::read_u64(in);
    model.stats.mean.resize(static_cast<Index>(cols));
    model.stats.std.resize(static_cast<Index>(cols));
    for (std::uint64_t i = 0; i < cols; ++i) model.stats.mean(static_cast<Index>(i)) = detail::read_f64(in);
    for (std::uint64_t i = 0; i < cols; ++i) model.stats.std(static_cast<Index>(i)) = detail::read_f64(in);

    model.params = make_network(shape_from_header(model.header));
    const std::uint64_t tensor_count = detail::read_u64(in);
    std::uint64_t seen = 0;
    visit_tensors(model.params, [&](const std::string& name, Matrix& m, Index) {
        require(seen < tensor_count, "model file '", path, "': missing tensor ", name);
        const std::uint64_t name_len = detail::read_u64(in);
        std::string stored(name_len, '\0');
        in.read(stored.data(), static_cast<std::streamsize>(name_len));
        require(stored == name, "model file '", path, "': expected tensor ", name, ", found ", stored);
        const std::uint64_t rows = detail::read_u64(in);
        const std::uint64_t cols_t = detail::read_u64(in);
        require(rows == static_cast<std::uint64_t>(m.rows()) && cols_t == static_cast<std::uint64_t>(m.cols()),
                "model file '", path, "': tensor ", name, " has shape ", rows, "x", cols_t, ", expected ", m.rows(),
                "x", m.cols());
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c) m(r, c) = detail::read_f64(in);
        ++seen;
    });
    require(seen == tensor_count, "model file '", path, "': unexpected extra tensors");
    return model;
}

}  // namespace accdet
