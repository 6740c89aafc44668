#include "jitcast/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace jitcast::io {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'J', 'I', 'T', 'C', 'K', 'P', 'T', '1'};

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
    return v;
}

void put_u64(std::string& out, std::uint64_t v) {
    v = to_le(v);
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v;
    std::memcpy(&v, p, 8);
    return to_le(v);
}

// FNV-1a over the raw tensor block.
std::uint64_t checksum(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct TensorTable {
    json entries = json::array();
    std::string block;

    void add(const std::string& name, const Tensor& t) {
        entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", block.size()}});
        for (double v : t.values()) put_u64(block, std::bit_cast<std::uint64_t>(v));
    }
};

json model_config_json(const model::ModelConfig& m) {
    return {{"d_model", m.d_model},
            {"n_heads", m.n_heads},
            {"d_ff", m.d_ff},
            {"n_encoder_layers", m.n_encoder_layers},
            {"n_decoder_layers", m.n_decoder_layers},
            {"input_feature_dim", m.input_feature_dim},
            {"layer_norm_eps", std::bit_cast<std::uint64_t>(m.layer_norm_eps)},
            {"residual_output", m.residual_output}};
}

model::ModelConfig model_config_from(const json& j) {
    model::ModelConfig m;
    m.d_model = j.at("d_model");
    m.n_heads = j.at("n_heads");
    m.d_ff = j.at("d_ff");
    m.n_encoder_layers = j.at("n_encoder_layers");
    m.n_decoder_layers = j.at("n_decoder_layers");
    m.input_feature_dim = j.at("input_feature_dim");
    m.layer_norm_eps = std::bit_cast<double>(j.at("layer_norm_eps").get<std::uint64_t>());
    m.residual_output = j.at("residual_output");
    return m;
}

Tensor row_of(std::initializer_list<double> v) { return Tensor::row(std::vector<double>(v)); }

}  // namespace

void save_checkpoint(const ClusterCheckpoint& c, std::ostream& out) {
    TensorTable table;
    for (std::size_t j = 0; j < c.ensemble.stages.size(); ++j)
        for (const auto& p : c.ensemble.stages[j].parameters())
            table.add("stage" + std::to_string(j + 1) + "/" + p.name, p.value);
    if (c.vanilla)
        for (const auto& p : c.vanilla->parameters()) table.add("vanilla/" + p.name, p.value);
    const auto& t = c.transforms;
    table.add("transforms/sma7", row_of({t.sma7.median, t.sma7.iqr}));
    table.add("transforms/day_of_week", row_of({t.day_of_week.mean, t.day_of_week.std}));
    table.add("transforms/context",
              Tensor::from_rows({{t.context[0].mean, t.context[0].std},
                                 {t.context[1].mean, t.context[1].std},
                                 {t.context[2].mean, t.context[2].std}}));
    table.add("transforms/pca", Tensor::from_rows({{t.pca.mean[0], t.pca.mean[1], t.pca.mean[2]},
                                                   {t.pca.axis[0], t.pca.axis[1], t.pca.axis[2]},
                                                   {t.pca.eigenvalues[0], t.pca.eigenvalues[1], t.pca.eigenvalues[2]},
                                                   {t.pca.explained_variance_ratio, 0.0, 0.0}}));
    table.add("series/kwh", Tensor::row(c.series.values));
    if (!c.centroids.empty()) table.add("cluster/centroids", c.centroids);

    json header = {{"format_version", kCheckpointVersion},
                   {"cluster", c.cluster},
                   {"seed", c.seed},
                   {"ensemble",
                    {{"n_models", c.ensemble.config.n_models},
                     {"encoder_len", c.ensemble.config.encoder_len},
                     {"base_decoder_len", c.ensemble.config.base_decoder_len},
                     {"model", model_config_json(c.ensemble.config.model)}}},
                   {"split", c.split_fractions},
                   {"stage_count", c.ensemble.stages.size()},
                   {"has_vanilla", c.vanilla.has_value()},
                   {"series", {{"customer_id", c.series.customer_id}, {"start_date", format_date(c.series.start_date)}}},
                   {"tensors", table.entries},
                   {"data_bytes", table.block.size()},
                   {"data_checksum", checksum(table.block)}};
    const std::string text = header.dump();
    std::string prefix(kMagic, 8);
    put_u64(prefix, text.size());
    out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(table.block.data(), static_cast<std::streamsize>(table.block.size()));
}

void save_checkpoint(const ClusterCheckpoint& c, const std::filesystem::path& path) {
    std::ostringstream buffer;
    save_checkpoint(c, buffer);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        const std::string bytes = buffer.str();
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

ClusterCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return load_checkpoint_bytes(ss.str(), path.string());
}

ClusterCheckpoint load_checkpoint_bytes(const std::string& bytes, const std::string& source) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        if (bytes.size() < 16 && bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) == 0)
            throw TruncatedCheckpointError(source + ": truncated before the header length");
        throw CorruptHeaderError(source + ": not a checkpoint (bad magic)");
    }
    const std::uint64_t header_len = get_u64(bytes.data() + 8);
    if (header_len > bytes.size() - 16) {
        throw TruncatedCheckpointError(source + ": header needs " + std::to_string(header_len) + " bytes, file has " +
                                       std::to_string(bytes.size() - 16));
    }
    json header;
    try {
        header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const json::exception& e) {
        throw CorruptHeaderError(source + ": header is not valid JSON (" + e.what() + ")");
    }
    if (!header.is_object() || !header.contains("format_version")) {
        throw CorruptHeaderError(source + ": header has no format_version");
    }
    const auto version = header["format_version"];
    if (!version.is_number_unsigned() || version.get<std::uint64_t>() != kCheckpointVersion) {
        throw VersionMismatchError(source + ": format_version " + version.dump() + " is not supported (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
    }
    try {
        const std::string_view block(bytes.data() + 16 + header_len, bytes.size() - 16 - header_len);
        const std::uint64_t data_bytes = header.at("data_bytes");
        if (block.size() < data_bytes) {
            throw TruncatedCheckpointError(source + ": tensor block has " + std::to_string(block.size()) + " of " +
                                           std::to_string(data_bytes) + " bytes");
        }
        if (block.size() > data_bytes) throw CorruptHeaderError(source + ": trailing bytes after tensor block");
        if (checksum(block) != header.at("data_checksum").get<std::uint64_t>()) {
            throw CorruptHeaderError(source + ": tensor block checksum mismatch");
        }

        std::map<std::string, Tensor> tensors;
        for (const auto& e : header.at("tensors")) {
            Shape shape = e.at("shape").get<Shape>();
            std::size_t count = 1;
            for (auto d : shape) count *= d;
            const std::uint64_t offset = e.at("offset");
            if (offset + count * 8 > block.size()) {
                throw CorruptHeaderError(source + ": tensor '" + e.at("name").get<std::string>() + "' overruns the block");
            }
            std::vector<double> values(count);
            for (std::size_t i = 0; i < count; ++i)
                values[i] = std::bit_cast<double>(get_u64(block.data() + offset + 8 * i));
            tensors.emplace(e.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
        }
        auto take = [&](const std::string& name) -> Tensor& {
            auto it = tensors.find(name);
            if (it == tensors.end()) throw CorruptHeaderError(source + ": missing tensor '" + name + "'");
            return it->second;
        };
        auto restore = [&](const model::ModelConfig& cfg, const std::string& prefix) {
            ParameterSet params;
            const auto layout_model = model::Transformer::initialize(cfg, 0);
            for (const auto& p : layout_model.parameters())
                params.add(p.name, take(prefix + p.name));
            try {
                return model::Transformer::from_parameters(cfg, std::move(params));
            } catch (const std::invalid_argument& e) {
                throw CorruptHeaderError(source + ": " + e.what());
            }
        };

        ClusterCheckpoint c;
        c.cluster = header.at("cluster");
        c.seed = header.at("seed");
        c.split_fractions = header.at("split").get<std::array<double, 3>>();
        const auto& ej = header.at("ensemble");
        c.ensemble.config.n_models = ej.at("n_models");
        c.ensemble.config.encoder_len = ej.at("encoder_len");
        c.ensemble.config.base_decoder_len = ej.at("base_decoder_len");
        c.ensemble.config.model = model_config_from(ej.at("model"));
        c.ensemble.config.validate();
        if (header.at("stage_count").get<std::size_t>() != c.ensemble.config.n_models) {
            throw CorruptHeaderError(source + ": stage_count disagrees with n_models");
        }
        for (std::size_t j = 1; j <= c.ensemble.config.n_models; ++j)
            c.ensemble.stages.push_back(restore(c.ensemble.config.model, "stage" + std::to_string(j) + "/"));
        if (header.at("has_vanilla").get<bool>()) c.vanilla = restore(c.ensemble.config.model, "vanilla/");

        const Tensor& sma = take("transforms/sma7");
        const Tensor& dow = take("transforms/day_of_week");
        const Tensor& ctx = take("transforms/context");
        const Tensor& pca = take("transforms/pca");
        if (sma.size() != 2 || dow.size() != 2 || ctx.size() != 6 || pca.size() != 12) {
            throw CorruptHeaderError(source + ": transform tensors have unexpected shapes");
        }
        c.transforms.sma7 = {sma[0], sma[1]};
        c.transforms.day_of_week = {dow[0], dow[1]};
        for (std::size_t i = 0; i < 3; ++i) c.transforms.context[i] = {ctx(i, 0), ctx(i, 1)};
        for (std::size_t i = 0; i < 3; ++i) {
            c.transforms.pca.mean[i] = pca(0, i);
            c.transforms.pca.axis[i] = pca(1, i);
            c.transforms.pca.eigenvalues[i] = pca(2, i);
        }
        c.transforms.pca.explained_variance_ratio = pca(3, 0);

        const auto& sj = header.at("series");
        c.series.customer_id = sj.at("customer_id");
        c.series.start_date = parse_date(sj.at("start_date").get<std::string>());
        const Tensor& kwh = take("series/kwh");
        c.series.values.assign(kwh.values().begin(), kwh.values().end());
        if (auto it = tensors.find("cluster/centroids"); it != tensors.end()) c.centroids = it->second;
        return c;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CorruptHeaderError(source + ": " + e.what());
    }
}

DatedForecast forecast_from_checkpoint(const ClusterCheckpoint& c, Date horizon_date) {
    const auto layout = c.ensemble.config.layout();
    const auto frame = data::build_feature_frame(c.series, c.transforms);
    const Date last_observed = horizon_date - std::chrono::days{1};
    const auto index = (last_observed - c.series.start_date).count();
    const auto needed = static_cast<long long>(layout.encoder_len + layout.observed_len - 2);
    if (index < needed || index >= static_cast<long long>(frame.size())) {
        throw std::invalid_argument("horizon date " + format_date(horizon_date) + " needs observed days " +
                                    format_date(last_observed - std::chrono::days{needed}) + " to " +
                                    format_date(last_observed) + "; the checkpoint series covers " +
                                    format_date(c.series.start_date) + " to " + format_date(c.series.end_date()));
    }
    const auto last = static_cast<std::size_t>(index);
    auto rows = [&](std::size_t first, std::size_t count) {
        Tensor t = Tensor::matrix(count, 3);
        for (std::size_t r = 0; r < count; ++r)
            for (std::size_t k = 0; k < 3; ++k) t(r, k) = frame.model_rows[first + r][k];
        return t;
    };
    const std::size_t first_observed = last + 1 - layout.observed_len;
    DatedForecast out;
    out.result = jit::cascade_predict(c.ensemble, rows(first_observed + 1 - layout.encoder_len, layout.encoder_len),
                                      rows(first_observed, layout.observed_len), last_observed, c.transforms);
    for (std::size_t k = 0; k < out.result.final_kwh.size(); ++k)
        out.dates.push_back(horizon_date + std::chrono::days{static_cast<int>(k)});
    return out;
}

}  // namespace jitcast::io
