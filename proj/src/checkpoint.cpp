#include "vleed/checkpoint.hpp"

#include <cstdint>

#include "vleed/binio.hpp"
#include "vleed/errors.hpp"

namespace vleed {

using binio::ByteReader;

void write_container(const std::string& path, const Container& c) {
    std::string out;
    out += c.magic;
    const std::string meta = c.meta.dump();
    binio::put_u64(out, meta.size());
    out += meta;
    binio::put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        binio::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        binio::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) binio::put_u64(out, d);
        for (std::size_t i = 0; i < t.size(); ++i) binio::put_f64(out, t[i]);
    }
    binio::write_file(path, out);
}

Container read_container(const std::string& path, const std::string& expected_magic) {
    ByteReader r(binio::read_file(path), path);

    Container c;
    c.magic = r.take(expected_magic.size(), "magic");
    if (c.magic != expected_magic)
        throw FormatError(path + ": bad magic '" + c.magic + "', expected '" + expected_magic +
                          "'");
    const std::uint64_t meta_len = r.u64("metadata length");
    const std::string meta = r.take(meta_len, "metadata");
    try {
        c.meta = nlohmann::ordered_json::parse(meta);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": bad metadata JSON: " + e.what());
    }
    const std::uint32_t count = r.u32("tensor count");
    c.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32("tensor name length");
        std::string name = r.take(name_len, "tensor name");
        const std::uint32_t rank = r.u32("tensor rank");
        if (rank == 0 || rank > 4)
            throw FormatError(path + ": implausible tensor rank " + std::to_string(rank) +
                              " at byte offset " + std::to_string(r.offset()));
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<std::size_t>(r.u64("tensor dim"));
            numel *= shape[d];
        }
        Tensor t(shape);
        for (std::size_t j = 0; j < numel; ++j) t[j] = r.f64("tensor data");
        c.tensors.emplace_back(std::move(name), std::move(t));
    }
    r.expect_done();
    return c;
}

nlohmann::ordered_json config_to_json(const VleedConfig& c) {
    nlohmann::ordered_json j;
    j["input_dim"] = c.input_dim;
    j["residual_dim"] = c.residual_dim;
    j["class_dim"] = c.class_dim;
    j["num_classes"] = c.num_classes;
    j["lambda_rec"] = c.lambda_rec;
    j["beta_r"] = c.beta_r;
    j["beta_c"] = c.beta_c;
    j["lambda_dis"] = c.lambda_dis;
    j["residual_hidden"] = c.residual_hidden;
    j["class_hidden"] = c.class_hidden;
    j["decoder_hidden"] = c.decoder_hidden;
    j["classifier_hidden"] = c.classifier_hidden;
    j["classifier_dropout"] = c.classifier_dropout;
    j["logvar_min"] = c.logvar_min;
    j["logvar_max"] = c.logvar_max;
    return j;
}

VleedConfig config_from_json(const nlohmann::ordered_json& j) {
    VleedConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.residual_dim = j.at("residual_dim").get<std::size_t>();
    c.class_dim = j.at("class_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.lambda_rec = j.at("lambda_rec").get<double>();
    c.beta_r = j.at("beta_r").get<double>();
    c.beta_c = j.at("beta_c").get<double>();
    c.lambda_dis = j.at("lambda_dis").get<double>();
    c.residual_hidden = j.at("residual_hidden").get<std::size_t>();
    c.class_hidden = j.at("class_hidden").get<std::size_t>();
    c.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
    c.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
    c.classifier_dropout = j.at("classifier_dropout").get<double>();
    c.logvar_min = j.at("logvar_min").get<double>();
    c.logvar_max = j.at("logvar_max").get<double>();
    c.validate();
    return c;
}

void save_model(const std::string& path, const VleedModel& m) {
    Container c;
    c.magic = kModelMagic;
    c.meta = config_to_json(m.config);
    for (std::size_t i = 0; i < m.vae.count(); ++i)
        c.tensors.emplace_back(m.vae.names[i], m.vae.values[i]);
    for (std::size_t i = 0; i < m.clf.count(); ++i)
        c.tensors.emplace_back(m.clf.names[i], m.clf.values[i]);
    write_container(path, c);
}

VleedModel load_model(const std::string& path) {
    Container c = read_container(path, kModelMagic);
    const VleedConfig config = config_from_json(c.meta);
    Rng rng(0);
    VleedModel m = init_vleed_model(config, rng);
    auto fill = [&](Params& group) {
        for (std::size_t i = 0; i < group.count(); ++i) {
            bool found = false;
            for (const auto& [name, t] : c.tensors) {
                if (name != group.names[i]) continue;
                if (!t.same_shape(group.values[i]))
                    throw FormatError(path + ": tensor '" + name + "' has shape " +
                                      Tensor::shape_str(t) + ", expected " +
                                      Tensor::shape_str(group.values[i]));
                group.values[i] = t;
                found = true;
                break;
            }
            if (!found) throw FormatError(path + ": missing tensor '" + group.names[i] + "'");
        }
    };
    fill(m.vae);
    fill(m.clf);
    if (c.tensors.size() != m.vae.count() + m.clf.count())
        throw FormatError(path + ": unexpected extra tensors in checkpoint");
    return m;
}

}  // namespace vleed
