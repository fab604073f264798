#include "atag/trainer.hpp"

#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include "atag/errors.hpp"
#include "atag/ops.hpp"

namespace atag {
namespace {

std::string save_rngs(const std::mt19937_64& shuffle, const std::mt19937_64& dropout) {
  std::ostringstream s;
  s << shuffle << '\n' << dropout;
  return s.str();
}

void load_rngs(const std::string& text, std::mt19937_64& shuffle, std::mt19937_64& dropout) {
  std::istringstream s(text);
  s >> shuffle >> dropout;
  if (!s) throw FormatError("checkpoint RNG state is malformed");
}

}  // namespace

void write_train_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "epoch,total,completeness,actionness,start,end,lr,seconds\n";
  out.precision(10);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.total << ',' << e.completeness << ',' << e.actionness << ',' << e.start << ','
        << e.end << ',' << e.learning_rate << ',' << e.seconds << '\n';
  }
}

TrainResult train(AtagModel& model, const RunConfig& config, const std::vector<TrainingExample>& data,
                  const TrainOptions& options) {
  config.validate();
  if (data.empty()) throw DataError("train: dataset is empty");
  PrecisionScope precision(config.precision);

  Adam adam(model.params(), config.optim);
  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t first_epoch = 0;
  if (options.resume) {
    apply_checkpoint(*options.resume, model);
    if (options.resume->has_optimizer) adam.restore(options.resume->optimizer);
    if (!options.resume->rng_state.empty()) load_rngs(options.resume->rng_state, shuffle_rng, dropout_rng);
    first_epoch = options.resume->epoch;
  }
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  TrainResult result;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = first_epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochLog log;
    log.epoch = epoch + 1;
    log.learning_rate = adam.learning_rate(static_cast<int>(epoch));
    ForwardContext ctx{true, config.model.dropout, &dropout_rng};
    try {
      for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
        const std::size_t end = std::min(order.size(), b + config.batch_size);
        const double inv = 1.0 / static_cast<double>(end - b);
        model.params().zero_grad();
        for (std::size_t k = b; k < end; ++k) {
          const auto& ex = data[order[k]];
          const ModelOutput out = model.forward(ex.features, ctx);
          const LossBreakdown loss = model_loss(out, ex.labels, config.loss);
          (inv == 1.0 ? loss.total : scale(loss.total, inv)).backward();
          log.total += loss.value;
          log.completeness += loss.completeness;
          log.actionness += loss.actionness;
          log.start += loss.start;
          log.end += loss.end;
        }
        adam.step(static_cast<int>(epoch));
      }
    } catch (const NumericError& e) {
      result.halted = true;
      result.halt_reason = "epoch " + std::to_string(epoch + 1) + ": " + e.what();
      break;
    }
    const double n = static_cast<double>(data.size());
    log.total /= n;
    log.completeness /= n;
    log.actionness /= n;
    log.start /= n;
    log.end /= n;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);

    if (!options.out_dir.empty()) {
      const bool last = epoch + 1 == config.epochs;
      if (config.checkpoint_every_epoch || last) {
        save_checkpoint(options.out_dir / "checkpoint.bin", model, config, epoch + 1, &adam.state(),
                        save_rngs(shuffle_rng, dropout_rng));
      }
      write_train_log_csv(result.log, options.out_dir / "train_log.csv");
    }
    if (options.on_epoch) options.on_epoch(log);
  }
  return result;
}

}  // namespace atag
