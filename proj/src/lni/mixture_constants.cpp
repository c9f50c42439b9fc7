#include "miglmm/lni.hpp"

namespace miglmm {

// Minimax fit of the inverse logit on |z| <= 40, max error 2.109e-9.
// Regenerate with tools/fit_logistic_mixture.py --reference-seed.
const NormalMixtureApprox& logistic_mixture_k8() {
  static const NormalMixtureApprox approx{
      {0.0032463432711820001, 0.051517476934459891, 0.19507791217585957,
       0.31556982310925769, 0.27414957633248649, 0.13107688129588038,
       0.027912419043032429, 0.0014495678378416428},
      {1.3653408062915715, 1.0595239711668787, 0.83079131409055473, 0.65073216709453396,
       0.50813542587244231, 0.39631334565366255, 0.30890425269438249,
       0.23821261675106084}};
  return approx;
}

}  // namespace miglmm
