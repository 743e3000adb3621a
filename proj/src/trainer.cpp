#include "hardboost/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <cmath>
#include <sstream>

#include "hardboost/checkpoint.hpp"
#include "hardboost/io.hpp"

namespace hardboost {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Baseline: return "Baseline";
        case Variant::V1: return "V1";
        case Variant::V2: return "V2";
        case Variant::V3: return "V3";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    if (name == "Baseline" || name == "baseline") return Variant::Baseline;
    if (name == "V1" || name == "v1") return Variant::V1;
    if (name == "V2" || name == "v2") return Variant::V2;
    if (name == "V3" || name == "v3") return Variant::V3;
    throw ConfigError("train.variant: unknown variant '" + std::string(name) + "' (expected Baseline, V1, V2, V3)");
}

void TrainConfig::validate() const {
    if (epochs_per_round < 0) throw ConfigError("train.epochs_per_round: must be non-negative");
    if (finetune_epochs < -1) throw ConfigError("train.finetune_epochs: must be non-negative or -1");
    if (batch_size == 0) throw ConfigError("train.batch_size: must be positive");
    sgd.validate();
    if (!(finetune_lr_scale > 0.0)) throw ConfigError("train.finetune_lr_scale: must be positive");
    margin.validate();
    if (!(alpha >= 0.0)) throw ConfigError("train.alpha: must be non-negative");
    if (!(lambda > 0.0)) throw ConfigError("train.lambda: must be positive");
    if (!(ema_momentum > 0.0 && ema_momentum < 1.0)) throw ConfigError("train.ema_momentum: must lie in (0, 1)");
    if (!(hardness_epsilon > 0.0)) throw ConfigError("train.hardness_epsilon: must be positive");
    if (rounds < 1 || rounds > kMaxRounds) throw ConfigError("train.rounds: must lie in [1, 4]");
    if (betas.size() < static_cast<std::size_t>(effective_rounds()))
        throw ConfigError("train.betas: need one beta per round");
    for (double b : betas)
        if (!std::isfinite(b)) throw ConfigError("train.betas: must be finite");
    if (hidden_width == 0) throw ConfigError("model.hidden_width: must be positive");
    if (embed_dim == 0) throw ConfigError("model.embed_dim: must be positive");
}

namespace {

struct BatchForward {
    std::vector<ForwardCache> caches;
    Matrix features;
    Matrix centers;
    std::vector<LogitRow> rows;
};

BatchForward run_forward(const EmbeddingModel& model, const BatchInputs& batch) {
    BatchForward fw;
    const std::size_t n = batch.inputs.rows();
    fw.features = Matrix(n, model.embed_dim());
    fw.caches.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        fw.caches.push_back(forward(model, batch.inputs.row(i)));
        std::copy(fw.caches.back().embedding.begin(), fw.caches.back().embedding.end(), fw.features.row(i).begin());
    }
    fw.centers = unit_centers(model);
    fw.rows = forward_logits(fw.features, fw.centers, batch.labels, batch.margin, batch.scales);
    return fw;
}

bool gradient_finite(const ModelGradient& g) {
    for (auto block : parameter_blocks(g))
        if (!all_finite(block)) return false;
    return true;
}

}  // namespace

double batch_loss(const EmbeddingModel& model, const BatchInputs& batch) {
    const auto fw = run_forward(model, batch);
    return weighted_loss(fw.rows, batch.weights);
}

ModelGradient batch_gradient(const EmbeddingModel& model, const BatchInputs& batch, double* loss) {
    const auto fw = run_forward(model, batch);
    if (loss) *loss = weighted_loss(fw.rows, batch.weights);
    const HeadGradient head = loss_backward(fw.rows, batch.weights, fw.features, fw.centers, batch.margin);

    ModelGradient grads = zeros_like(model);
    for (std::size_t i = 0; i < fw.caches.size(); ++i) backward(model, fw.caches[i], head.features.row(i), grads);
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
        const Vector g =
            normalize_backward(fw.centers.row(c), l2_norm(model.centers.row(c)), head.centers.row(c));
        std::copy(g.begin(), g.end(), grads.centers.row(c).begin());
    }
    return grads;
}

RoundResult train_round(const EmbeddingModel& init, const TrainingSet& data, const WeightTable& table,
                        const TrainConfig& config, const RoundPlan& plan) {
    if (table.size() != data.size())
        throw ContractError("train_round: weight table covers " + std::to_string(table.size()) + " samples, dataset has " +
                            std::to_string(data.size()));
    if (init.input_dim() != data.inputs.cols() || init.num_classes() != data.num_classes)
        throw DimensionError("train_round: model shape does not match dataset");
    for (auto id : plan.sample_ids)
        if (id >= data.size()) throw ContractError("train_round: sample id out of range");

    const auto started = std::chrono::steady_clock::now();
    RoundResult result{init, zeros_like(init), HardnessStats{}, RoundRecord{}};
    result.stats.ema_momentum = config.ema_momentum;
    result.stats.lambda = config.lambda;
    result.stats.epsilon = config.hardness_epsilon;
    result.record.round = plan.round;

    SgdOptimizer optimizer(plan.sgd, init);
    const CounterRng round_rng = CounterRng(config.seed).split("shuffle").split(static_cast<std::uint64_t>(plan.round));
    const double base_scale = config.margin.base_scale;
    const std::size_t dim = data.inputs.cols();

    std::vector<std::size_t> order = plan.sample_ids;
    for (int epoch = 0; epoch < plan.epochs; ++epoch) {
        order = plan.sample_ids;
        CounterRng epoch_rng = round_rng.split(static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), epoch_rng);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t n = std::min(config.batch_size, order.size() - start);
            BatchInputs batch{Matrix(n, dim), {}, {}, {}, config.margin};
            batch.labels.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t id = order[start + i];
                std::copy(data.inputs.row(id).begin(), data.inputs.row(id).end(), batch.inputs.row(i).begin());
                batch.labels.push_back(data.labels[id]);
                batch.weights.push_back(plan.weighted ? table.weights[id] : 1.0);
            }
            if (plan.weighted) {
                result.stats = update_running_stats(result.stats, batch.weights);
                for (double w : batch.weights)
                    batch.scales.push_back(adapt_scale(base_scale, normalize_hardness(w, result.stats)));
            } else {
                batch.scales.assign(n, base_scale);
            }

            auto diverged = [&](const std::string& what) {
                std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(start + n));
                return TrainingDivergedError(what + " in round " + std::to_string(plan.round) + ", epoch " +
                                                 std::to_string(epoch) + ", batch " + std::to_string(batch_index),
                                             epoch, batch_index, std::move(ids));
            };
            double loss = 0.0;
            ModelGradient grads;
            try {
                grads = batch_gradient(result.model, batch, &loss);
            } catch (const NumericError& e) {
                throw diverged(e.what());
            }
            if (!std::isfinite(loss) || !gradient_finite(grads)) throw diverged("non-finite loss");
            optimizer.step(result.model, grads, epoch);
            loss_sum += loss * static_cast<double>(n);
        }
        const double epoch_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
        result.record.metrics.push_back({epoch, epoch_loss, effective_lr(plan.sgd, epoch)});
        result.record.final_loss = epoch_loss;
    }
    result.momentum = optimizer.velocity();
    result.record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

std::vector<double> compute_dataset_probs(const EmbeddingModel& model, const TrainingSet& data,
                                          const MarginParams& margin) {
    const Matrix centers = unit_centers(model);
    std::vector<double> probs(data.size());
    Matrix feature(1, model.embed_dim());
    const double scale = margin.base_scale;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector e = embed(model, data.inputs.row(i));
        std::copy(e.begin(), e.end(), feature.row(0).begin());
        const std::size_t label = data.labels[i];
        const auto rows = forward_logits(feature, centers, std::span(&label, 1), margin, std::span(&scale, 1));
        probs[i] = softmax_prob(rows[0]);
    }
    return probs;
}

std::vector<std::size_t> misclassified_samples(const EmbeddingModel& model, const TrainingSet& data) {
    const Matrix centers = unit_centers(model);
    std::vector<std::size_t> wrong;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector e = embed(model, data.inputs.row(i));
        std::size_t best = 0;
        double best_cos = -2.0;
        for (std::size_t c = 0; c < centers.rows(); ++c) {
            const double cs = dot(e, centers.row(c));
            if (cs > best_cos) {
                best_cos = cs;
                best = c;
            }
        }
        if (best != data.labels[i]) wrong.push_back(i);
    }
    return wrong;
}

namespace {

std::filesystem::path round_dir(const std::filesystem::path& run_dir, int round) {
    return run_dir / ("round_" + std::to_string(round));
}

/// Schedule of rounds >= 2: the base lr times finetune_lr_scale, with the drop
/// epochs rescaled to the round's epoch budget.
SgdConfig round_schedule(const TrainConfig& config, int epochs) {
    SgdConfig sgd = config.sgd;
    sgd.learning_rate *= config.finetune_lr_scale;
    if (epochs != config.epochs_per_round && config.epochs_per_round > 0) {
        sgd.lr_drop_epochs.clear();
        for (int e : config.sgd.lr_drop_epochs) {
            const int scaled = static_cast<int>(std::lround(static_cast<double>(e) * epochs / config.epochs_per_round));
            if (sgd.lr_drop_epochs.empty() || scaled > sgd.lr_drop_epochs.back()) sgd.lr_drop_epochs.push_back(scaled);
        }
    }
    return sgd;
}

std::vector<std::size_t> iota_ids(std::size_t n) {
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    return ids;
}

}  // namespace

BoostResult boost_train(const TrainingSet& data, const TrainConfig& config, const RunOptions& options) {
    config.validate();
    if (data.size() == 0) throw DataError("boost_train: empty training set");
    if (options.resume && !options.run_dir) throw ConfigError("resume requires a run directory");

    const int rounds = config.effective_rounds();
    const CounterRng init_rng = CounterRng(config.seed).split("init");
    ModelShape shape{data.inputs.cols(), std::vector<std::size_t>(config.hidden_layers, config.hidden_width),
                     config.embed_dim, data.num_classes};

    int completed_on_disk = 0;
    if (options.resume && std::filesystem::exists(options.run_dir.value() / "ensemble.manifest"))
        completed_on_disk = static_cast<int>(load_manifest(*options.run_dir).checkpoints.size());

    BoostResult out;
    EnsembleManifest manifest{config.variant, {}, {}};
    WeightTable table = init_table(data.size(), config.alpha);

    for (int k = 1; k <= rounds; ++k) {
        RoundPlan plan;
        plan.round = k;
        plan.sample_ids = iota_ids(data.size());
        EmbeddingModel init;

        if (k == 1) {
            init = init_model(shape, init_rng.split(1));
            plan.epochs = config.epochs_per_round;
            plan.sgd = config.sgd;
            plan.weighted = config.variant != Variant::Baseline;
        } else {
            const EmbeddingModel& previous = out.ensemble.models.back();
            table = update_weights(table, compute_dataset_probs(previous, data, config.margin));
            if (config.renormalize_weights) renormalize(table);
            plan.weighted = true;
            const int finetune = config.finetune_epochs < 0 ? config.epochs_per_round : config.finetune_epochs;
            plan.epochs = finetune;
            plan.sgd = round_schedule(config, finetune);
            switch (config.variant) {
                case Variant::V1:
                    init = previous;
                    break;
                case Variant::V2:
                    init = previous;
                    plan.sample_ids = misclassified_samples(previous, data);
                    if (plan.sample_ids.empty())
                        throw EmptyHardSetError("V2: round " + std::to_string(k - 1) +
                                                " model misclassifies no training sample; nothing to fine-tune on");
                    break;
                case Variant::V3:
                    init = init_model(shape, init_rng.split(static_cast<std::uint64_t>(k)));
                    break;
                case Variant::Baseline:
                    throw ContractError("Baseline runs a single round");
            }
        }

        RoundRecord record;
        EmbeddingModel trained;
        if (k <= completed_on_disk) {
            RoundState state = load_round(*options.run_dir, k);
            if (state.table.weights != table.weights)
                throw DataError("resume: stored weight table of round " + std::to_string(k) +
                                " differs from recomputation; was the config changed?");
            trained = std::move(state.model);
            record.round = k;
            record.metrics = std::move(state.metrics);
            record.final_loss = record.metrics.empty() ? 0.0 : record.metrics.back().loss;
        } else {
            RoundResult result = train_round(init, data, table, config, plan);
            trained = std::move(result.model);
            record = std::move(result.record);
            if (options.run_dir) {
                save_round(*options.run_dir,
                           RoundState{k, trained, std::move(result.momentum), table,
                                      WeightTableMeta{table.round, config.alpha, config.lambda, config.ema_momentum},
                                      record.metrics});
            }
        }

        if (options.run_dir) {
            record.checkpoint = round_dir(*options.run_dir, k) / "checkpoint.bin";
            record.weight_table = round_dir(*options.run_dir, k) / "weights.csv";
            manifest.checkpoints.push_back(std::filesystem::path("round_" + std::to_string(k)) / "checkpoint.bin");
            manifest.betas.push_back(config.betas[static_cast<std::size_t>(k - 1)]);
            if (k > completed_on_disk) save_manifest(*options.run_dir, manifest);
        }

        out.ensemble.models.push_back(std::move(trained));
        out.ensemble.betas.push_back(config.betas[static_cast<std::size_t>(k - 1)]);
        out.tables.push_back(table);
        if (options.on_round) options.on_round(record);
        out.records.push_back(std::move(record));
    }
    return out;
}

void save_round(const std::filesystem::path& run_dir, const RoundState& state) {
    const auto dir = round_dir(run_dir, state.round);
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "checkpoint.bin", Checkpoint{state.model, state.momentum});
    save_weight_table(dir / "weights.csv", state.table, state.meta);
    std::ostringstream metrics;
    metrics << "epoch,loss,lr\n";
    for (const auto& m : state.metrics)
        metrics << m.epoch << ',' << format_double(m.loss) << ',' << format_double(m.lr) << '\n';
    write_text(dir / "metrics.csv", metrics.str());
}

RoundState load_round(const std::filesystem::path& run_dir, int round) {
    const auto dir = round_dir(run_dir, round);
    RoundState state;
    state.round = round;
    Checkpoint ckpt = load_checkpoint(dir / "checkpoint.bin");
    state.model = std::move(ckpt.model);
    state.momentum = ckpt.momentum ? std::move(*ckpt.momentum) : zeros_like(state.model);
    state.table = load_weight_table(dir / "weights.csv", &state.meta);

    const std::string text = read_text(dir / "metrics.csv");
    const auto lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != "epoch,loss,lr") throw DataError((dir / "metrics.csv").string() + ": bad header");
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto line = trim(lines[l]);
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 3) throw DataError((dir / "metrics.csv").string() + ": expected 3 fields");
        state.metrics.push_back({static_cast<int>(parse_int(f[0])), parse_double(f[1]), parse_double(f[2])});
    }
    return state;
}

void save_manifest(const std::filesystem::path& run_dir, const EnsembleManifest& manifest) {
    if (manifest.checkpoints.size() != manifest.betas.size())
        throw ContractError("manifest needs one beta per checkpoint");
    std::ostringstream out;
    out << "format = hardboost-ensemble\n"
        << "version = " << kManifestVersion << '\n'
        << "variant = " << to_string(manifest.variant) << '\n'
        << "models = " << manifest.checkpoints.size() << '\n';
    for (std::size_t k = 0; k < manifest.checkpoints.size(); ++k) {
        out << "model." << k + 1 << ".checkpoint = " << manifest.checkpoints[k].generic_string() << '\n'
            << "model." << k + 1 << ".beta = " << format_double(manifest.betas[k]) << '\n';
    }
    write_text(run_dir / "ensemble.manifest", out.str());
}

EnsembleManifest load_manifest(const std::filesystem::path& run_dir) {
    const auto path = run_dir / "ensemble.manifest";
    if (!std::filesystem::exists(path)) throw DataError("no ensemble.manifest in " + run_dir.string());
    std::map<std::string, std::string, std::less<>> kv;
    const std::string text = read_text(path);
    for (auto line : split(text, '\n')) {
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw DataError(path.string() + ": malformed line");
        kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    }
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw DataError(path.string() + ": missing key '" + key + "'");
        return it->second;
    };
    if (get("format") != "hardboost-ensemble") throw DataError(path.string() + ": not an ensemble manifest");
    const auto version = parse_int(get("version"));
    if (version != kManifestVersion)
        throw DataError(path.string() + ": unsupported manifest version " + std::to_string(version));

    EnsembleManifest m;
    m.variant = parse_variant(get("variant"));
    const auto count = parse_int(get("models"));
    if (count < 1 || count > kMaxRounds) throw DataError(path.string() + ": bad model count");
    for (std::int64_t k = 1; k <= count; ++k) {
        const std::string prefix = "model." + std::to_string(k) + ".";
        m.checkpoints.emplace_back(get(prefix + "checkpoint"));
        m.betas.push_back(parse_double(get(prefix + "beta")));
    }
    return m;
}

Ensemble load_ensemble(const std::filesystem::path& run_dir, const std::optional<std::vector<double>>& betas_override) {
    const EnsembleManifest m = load_manifest(run_dir);
    Ensemble e;
    for (const auto& rel : m.checkpoints) e.models.push_back(load_checkpoint(run_dir / rel).model);
    e.betas = betas_override ? *betas_override : m.betas;
    if (e.betas.size() != e.models.size())
        throw ConfigError("--betas: expected " + std::to_string(e.models.size()) + " values, got " +
                          std::to_string(e.betas.size()));
    e.validate();
    return e;
}

}  // namespace hardboost
