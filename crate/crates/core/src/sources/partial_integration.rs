use crate::element;
use crate::fem::Rhs;
use crate::mesh::VolumeConductor;
use crate::Dipole;

/// `b_i = M . grad phi_i(x0)` on the vertices of the dipole element.
pub(super) fn assemble(vc: &VolumeConductor, e: usize, dipole: &Dipole) -> Rhs {
    if dipole.moment == crate::Vec3::zeros() {
        return Rhs::Sparse(Vec::new());
    }
    let mesh = vc.mesh();
    let v = mesh.element_vertices(e);
    let grads = element::basis_gradients(mesh.kind(), &v, &dipole.position)
        .or_else(|| {
            // Newton did not settle (point on a distorted hex face); fall
            // back to the element center.
            let xi = mesh.kind().reference_center();
            element::basis_gradients_at_reference(mesh.kind(), &v, &xi).map(|g| g.0)
        })
        .expect("non-degenerate element");
    Rhs::Sparse(
        mesh.element(e)
            .iter()
            .zip(grads)
            .map(|(&i, g)| (i, dipole.moment.dot(&g)))
            .collect(),
    )
}
