#include "diffpurify/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "diffpurify/operators.hpp"
#include "diffpurify/tensor_io.hpp"

namespace diffpurify {

Classifier::Classifier(int in_dim, const std::vector<int>& hidden, int classes,
                       std::uint64_t init_seed) {
    std::vector<int> sizes;
    sizes.push_back(in_dim);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(classes);
    net_ = Mlp(sizes, init_seed);
}

int Classifier::predict(const State& x) const {
    State z = logits(x);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

namespace {
State softmax(const State& z) {
    double mx = *std::max_element(z.begin(), z.end());
    State p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}
}  // namespace

double Classifier::cross_entropy(const State& x, int label) const {
    if (label < 0 || label >= num_classes())
        throw std::invalid_argument("cross_entropy: label out of range");
    State z = logits(x);
    double mx = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - mx);
    return -(z[static_cast<std::size_t>(label)] - mx - std::log(lse));
}

void Classifier::save(const std::string& path) const {
    TensorBundle b;
    Tensor meta;
    const auto& sz = net_.sizes();
    meta.dims = {static_cast<std::uint32_t>(sz.size())};
    for (int s : sz) meta.data.push_back(static_cast<double>(s));
    b.add("sizes", std::move(meta));
    Tensor params;
    auto flat = net_.flatten();
    params.dims = {static_cast<std::uint32_t>(flat.size())};
    params.data = std::move(flat);
    b.add("params", std::move(params));
    save_bundle(path, b);
}

Classifier Classifier::load(const std::string& path) {
    TensorBundle b = load_bundle(path);
    const auto& sizes_t = b.get("sizes");
    std::vector<int> hidden;
    for (std::size_t i = 1; i + 1 < sizes_t.data.size(); ++i)
        hidden.push_back(static_cast<int>(sizes_t.data[i]));
    Classifier clf(static_cast<int>(sizes_t.data.front()), hidden,
                   static_cast<int>(sizes_t.data.back()), 0);
    clf.net_.unflatten(b.get("params").data);
    return clf;
}

Classifier train_classifier(const LabeledDataset& data, const ClassifierTrainConfig& cfg) {
    if (data.samples.empty() || data.samples.size() != data.labels.size())
        throw std::invalid_argument("train_classifier: bad dataset");
    std::set<int> present(data.labels.begin(), data.labels.end());
    if (present.size() < 2)
        throw std::invalid_argument("train_classifier: need at least two classes present");

    int classes = data.num_classes > 0 ? data.num_classes : (*present.rbegin() + 1);
    int in_dim = static_cast<int>(data.samples[0].size());
    Classifier clf(in_dim, cfg.hidden, classes, derive_seed(cfg.seed, "clf-init"));

    RngStream rng(derive_seed(cfg.seed, "clf-train"));
    auto params = clf.net().flatten();
    AdamOptimizer opt(params.size(), cfg.lr);

    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            auto grads = clf.net().zero_grads();
            for (std::size_t b = start; b < stop; ++b) {
                State x = data.samples[order[b]];
                if (cfg.noise_aug > 0.0)
                    for (auto& v : x) v += cfg.noise_aug * rng.gaussian();
                int label = data.labels[order[b]];
                State z = clf.net().forward(x);
                State p = softmax(z);
                p[static_cast<std::size_t>(label)] -= 1.0;
                for (auto& v : p) v /= static_cast<double>(stop - start);
                clf.net().backprop(x, p, grads);
            }
            std::vector<double> flat_grad;
            flat_grad.reserve(params.size());
            for (std::size_t l = 0; l < grads.w.size(); ++l) {
                flat_grad.insert(flat_grad.end(), grads.w[l].begin(), grads.w[l].end());
                flat_grad.insert(flat_grad.end(), grads.b[l].begin(), grads.b[l].end());
            }
            opt.step(params, flat_grad);
            clf.net().unflatten(params);
        }
    }
    return clf;
}

State classifier_grad(const Classifier& clf, const State& x, int label) {
    if (label < 0 || label >= clf.num_classes())
        throw std::invalid_argument("classifier_grad: label out of range");
    State z = clf.logits(x);
    State p = softmax(z);
    p[static_cast<std::size_t>(label)] -= 1.0;
    return clf.net().input_vjp(x, p);
}

void AttackSpec::validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("AttackSpec: epsilon must be >= 0");
    if (steps < 1) throw std::invalid_argument("AttackSpec: steps must be >= 1");
    if (!(step_size > 0.0)) throw std::invalid_argument("AttackSpec: step_size must be > 0");
    if (step_size * steps < epsilon)
        throw std::invalid_argument("AttackSpec: budget unreachable (step_size * steps < epsilon)");
}

State pgd_attack(const Classifier& clf, const State& x_ori, int label, const AttackSpec& spec) {
    spec.validate();
    if (spec.epsilon == 0.0) return x_ori;
    State x = x_ori;
    for (int it = 0; it < spec.steps; ++it) {
        State g = classifier_grad(clf, x, label);
        State s = sign_vec(g);
        for (std::size_t i = 0; i < x.size(); ++i) {
            double v = x[i] + spec.step_size * s[i];
            v = std::min(v, x_ori[i] + spec.epsilon);
            v = std::max(v, x_ori[i] - spec.epsilon);
            x[i] = v;
        }
    }
    return x;
}

double accuracy(const Classifier& clf, const std::vector<State>& samples,
                const std::vector<int>& labels) {
    if (samples.size() != labels.size())
        throw std::invalid_argument("accuracy: samples/labels length mismatch");
    if (samples.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
    long correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (clf.predict(samples[i]) == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace diffpurify
