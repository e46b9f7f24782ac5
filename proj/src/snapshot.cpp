#include "flowmi/flow/snapshot.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowmi/error.hpp"

namespace flowmi::flow {

namespace {

void write_vector(std::ofstream& out, const char* tag, std::span<const double> v) {
    out << tag << ' ' << v.size();
    char buf[40];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%a", x);
        out << ' ' << buf;
    }
    out << "\n";
}

std::vector<double> read_vector(std::istringstream& in, const char* tag) {
    std::string t;
    std::size_t len = 0;
    if (!(in >> t >> len) || t != tag) throw DataError(std::string("snapshot: expected '") + tag + "' record");
    std::vector<double> v(len);
    std::string tok;
    for (std::size_t i = 0; i < len; ++i) {
        if (!(in >> tok)) throw DataError("snapshot: truncated vector payload");
        v[i] = std::strtod(tok.c_str(), nullptr);
    }
    return v;
}

} // namespace

void save_snapshot(const ConditionalFlow& flow, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write snapshot '" + path + "'");
    const auto& cfg = flow.config();
    out << "flowmi-snapshot v1\n";
    out << "config " << cfg.data_dim << ' ' << cfg.cond_dim << ' ' << cfg.n_components << ' ' << cfg.hidden_dim << ' '
        << cfg.train.epochs << ' ' << cfg.train.batch_size << ' ';
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", cfg.train.learning_rate);
    out << buf << ' ' << cfg.train.seed << "\n";

    write_vector(out, "x_shift", flow.input_standardizer().shift);
    write_vector(out, "x_scale", flow.input_standardizer().scale);
    write_vector(out, "z_shift", flow.cond_standardizer().shift);
    write_vector(out, "z_scale", flow.cond_standardizer().scale);

    const auto& layout = flow.params().layout();
    out << "tensors " << layout.entries().size() << "\n";
    for (const auto& e : layout.entries()) {
        out << e.name << ' ' << e.shape.size();
        for (int s : e.shape) out << ' ' << s;
        out << "\n";
        write_vector(out, "data", flow.params().values().subspan(static_cast<std::size_t>(e.offset),
                                                                 static_cast<std::size_t>(e.size)));
    }
    if (!out) throw DataError("error while writing snapshot '" + path + "'");
}

ConditionalFlow load_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open snapshot '" + path + "'");
    std::stringstream whole;
    whole << in.rdbuf();
    std::istringstream s(whole.str());

    std::string magic, version;
    if (!(s >> magic >> version) || magic != "flowmi-snapshot") throw DataError("snapshot: bad header");
    if (version != "v1") throw DataError("snapshot: unsupported version '" + version + "'");

    std::string tag;
    FlowConfig cfg;
    std::string lr_tok;
    if (!(s >> tag >> cfg.data_dim >> cfg.cond_dim >> cfg.n_components >> cfg.hidden_dim >> cfg.train.epochs >>
          cfg.train.batch_size >> lr_tok >> cfg.train.seed) ||
        tag != "config")
        throw DataError("snapshot: bad config record");
    cfg.train.learning_rate = std::strtod(lr_tok.c_str(), nullptr);

    Standardizer xs, zs;
    xs.shift = read_vector(s, "x_shift");
    xs.scale = read_vector(s, "x_scale");
    zs.shift = read_vector(s, "z_shift");
    zs.scale = read_vector(s, "z_scale");

    ConditionalFlow flow(cfg, 0);
    flow.set_standardizers(std::move(xs), std::move(zs));

    std::size_t count = 0;
    if (!(s >> tag >> count) || tag != "tensors") throw DataError("snapshot: bad tensor count record");
    if (count != flow.params().layout().entries().size())
        throw DataError("snapshot: tensor count does not match the configuration");

    for (std::size_t t = 0; t < count; ++t) {
        std::string name;
        std::size_t rank = 0;
        if (!(s >> name >> rank)) throw DataError("snapshot: truncated tensor header");
        std::vector<int> shape(rank);
        for (auto& d : shape)
            if (!(s >> d)) throw DataError("snapshot: truncated tensor shape");
        const auto& entry = flow.params().layout().at(name);
        if (entry.shape != shape) throw DataError("snapshot: tensor '" + name + "' shape mismatch");
        const auto payload = read_vector(s, "data");
        if (static_cast<int>(payload.size()) != entry.size)
            throw DataError("snapshot: tensor '" + name + "' payload size mismatch");
        auto dst = flow.params().tensor(name);
        for (std::size_t i = 0; i < payload.size(); ++i) dst[i] = payload[i];
    }
    return flow;
}

} // namespace flowmi::flow
