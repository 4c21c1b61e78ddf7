#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "netchoice/autodiff.hpp"
#include "netchoice/graph.hpp"
#include "netchoice/matrix.hpp"

namespace netchoice {

// ---- parameter layout --------------------------------------------------------

enum class ParamInit { glorot, zero };

struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  ParamInit init = ParamInit::glorot;
  std::size_t size() const { return rows * cols; }
};

/// Named blocks of one flat parameter vector. Shapes are a pure function of
/// the model spec and data dimensions.
class ParamLayout {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, ParamInit init);
  const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  std::size_t index_of(const std::string& name) const;
  std::size_t size() const noexcept { return total_; }

  /// Glorot-uniform draws in +-sqrt(6 / (fan_in + fan_out)) for weight
  /// blocks and zeros for zero-initialised blocks.
  std::vector<double> initialize(std::uint64_t seed) const;

  DenseMatrix view(std::span<const double> flat, std::size_t block) const;
  void assign(std::span<double> flat, std::size_t block, const DenseMatrix& value) const;

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

/// Parameter leaves bound onto a tape, one Var per layout block.
struct BoundParams {
  std::vector<ad::Var> vars;
  ad::Var operator[](std::size_t i) const { return vars.at(i); }
};

BoundParams bind_params(ad::Tape& tape, const ParamLayout& layout, std::span<const double> values);
std::vector<double> collect_grads(const ad::Tape& tape, const BoundParams& params,
                                  const ParamLayout& layout);

/// Flat parameter vector plus the batch-normalisation statistics it was
/// trained with.
struct Weights {
  std::vector<double> values;
  ad::BatchNormStats batchnorm;

  bool operator==(const Weights&) const = default;
};

// ---- model specification ---------------------------------------------------

enum class ModelKind { logit, gcn, skip_gnn };
enum class Activation { relu, identity };

std::string to_string(ModelKind kind);
std::string to_string(Activation activation);

/// Architecture hyper-parameters. Fields irrelevant to `kind` are ignored.
struct ModelSpec {
  ModelKind kind = ModelKind::skip_gnn;
  bool intercept = true;

  // Non-linear private part f(X, Q): hidden layers and width (0 layers = off).
  std::size_t fc_layers = 2;
  std::size_t fc_width = 16;

  // Graph layers (L). Also the depth of the generic GCN.
  std::size_t gcn_layers = 2;
  std::size_t gcn_width = 16;  // hidden width of the generic GCN
  Activation activation = Activation::relu;

  // Multinomial options.
  bool iia = false;
  std::size_t embed_dim = 4;             // K
  std::size_t embed_hidden_layers = 1;
  std::size_t embed_entry_layer = 0;     // GCN layer where Q_j joins the block
  int sociodemographic_alternatives = -1;  // alternatives receiving Q; -1 = J - 1

  bool operator==(const ModelSpec&) const = default;
};

/// Data dimensions a model is built against.
struct ModelDims {
  std::size_t attributes = 0;        // k, per alternative when alternative_blocks
  std::size_t sociodemographics = 0;  // r
  std::size_t alternatives = 2;       // J
  bool alternative_blocks = false;    // X holds J blocks of k columns

  std::size_t x_cols() const { return alternative_blocks ? alternatives * attributes : attributes; }
  bool operator==(const ModelDims&) const = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelDims& dims);
ModelDims model_dims_from_json(const nlohmann::json& j);

/// Rejects inconsistent specs, including socio-demographics wired into all J
/// utilities of an unrestricted multinomial model.
void validate(const ModelSpec& spec, const ModelDims& dims);

// ---- models -----------------------------------------------------------------

struct ForwardContext {
  ad::Mode mode = ad::Mode::infer;
  ad::BatchNormStats* batchnorm = nullptr;
  std::span<const std::size_t> stat_rows;  // rows feeding batch statistics (all when empty)
  const AdjacencyGraph* graph = nullptr;
};

class ChoiceModel {
 public:
  virtual ~ChoiceModel() = default;

  const ModelSpec& spec() const noexcept { return spec_; }
  const ModelDims& dims() const noexcept { return dims_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  ad::Head head() const noexcept {
    return dims_.alternative_blocks ? ad::Head::softmax : ad::Head::sigmoid;
  }
  std::size_t n_alternatives() const noexcept { return dims_.alternatives; }

  virtual std::size_t batchnorm_width() const { return 0; }
  virtual bool uses_graph() const { return false; }

  /// Latent utilities, n x 1 for the sigmoid head and n x J for softmax.
  virtual ad::Var utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                            const ForwardContext& ctx) const = 0;

  /// Shape checks; `graph_required` is off for parts that never touch the graph.
  void check_inputs(const DenseMatrix& x, const DenseMatrix& q, const AdjacencyGraph* graph,
                    bool graph_required = true) const;
  std::vector<double> initialize(std::uint64_t seed) const { return layout_.initialize(seed); }

 protected:
  ChoiceModel(ModelSpec spec, ModelDims dims) : spec_(spec), dims_(dims) {}
  ModelSpec spec_;
  ModelDims dims_;
  ParamLayout layout_;
};

std::unique_ptr<ChoiceModel> make_model(const ModelSpec& spec, const ModelDims& dims);

/// sigmoid or row softmax of utilities according to the head.
ad::Var probabilities(ad::Var utilities, ad::Head head);

struct ForwardResult {
  DenseMatrix utilities;
  DenseMatrix probabilities;
};

/// Forward pass outside training. Infer mode uses the stored whole-sample
/// statistics; train mode normalises with the statistics of all rows and
/// leaves `weights` untouched.
ForwardResult predict(const ChoiceModel& model, const Weights& weights, const DenseMatrix& x,
                      const DenseMatrix& q, const AdjacencyGraph* graph,
                      ad::Mode mode = ad::Mode::infer);

/// Whole-sample batch-normalisation statistics over `rows` (all rows when
/// empty): what inference uses once training has finished.
ad::BatchNormStats whole_sample_statistics(const ChoiceModel& model, std::span<const double> values,
                                           const DenseMatrix& x, const DenseMatrix& q,
                                           const AdjacencyGraph* graph,
                                           std::span<const std::size_t> rows = {});

/// Hard predictions: sigmoid head predicts 1 iff p > 0.5; softmax head takes
/// the arg-max with ties going to the lowest class index.
std::vector<int> predict_classes(const DenseMatrix& probabilities, ad::Head head);

// ---- closed-form reference models --------------------------------------------

struct LinearUtilityParams {
  std::vector<double> beta;
  std::vector<double> gamma;
  double intercept = 0.0;
};

/// sigmoid(X beta + Q gamma + intercept) per row.
std::vector<double> logit_forward(const LinearUtilityParams& params, const DenseMatrix& x,
                                  const DenseMatrix& q);

struct ConditionalLogitParams {
  std::vector<double> beta;               // shared across alternatives
  std::vector<double> asc;                // J - 1 constants, last alternative is the base
  DenseMatrix gamma;                      // r x m, m <= J - 1 alternatives
};

/// n x J choice probabilities; x holds J blocks of k attribute columns.
DenseMatrix conditional_logit_forward(const ConditionalLogitParams& params, const DenseMatrix& x,
                                      const DenseMatrix& q, std::size_t alternatives);

/// Loads `params` into the flat parameter vector of a logit model.
std::vector<double> logit_weights(const ChoiceModel& model, const LinearUtilityParams& params);

// ---- Skip-GNN helpers ----------------------------------------------------------

/// Private utility u_pr = X beta + Q gamma + intercept + BatchNorm(f(X, Q)) of
/// a binary Skip-GNN (n x 1).
DenseMatrix private_utility(const ChoiceModel& skip_gnn, const Weights& weights, const DenseMatrix& x,
                            const DenseMatrix& q, ad::Mode mode);

/// Sets every graph-layer parameter of a Skip-GNN to zero, switching the
/// social block off.
void zero_social_block(const ChoiceModel& skip_gnn, std::span<double> values);

// ---- checkpoints -----------------------------------------------------------------

struct Checkpoint {
  ModelSpec spec;
  ModelDims dims;
  Weights weights;
};

inline constexpr int kCheckpointVersion = 1;

/// JSON text container; doubles use shortest round-trip formatting so a
/// save/load cycle is bit exact.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace netchoice
