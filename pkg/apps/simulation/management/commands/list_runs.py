from django.core.management.base import BaseCommand

from apps.simulation.models import SimulationRun
from apps.simulation.registry import registry_available


class Command(BaseCommand):
    help = "Lista las corridas registradas más recientes."

    def add_arguments(self, parser):
        parser.add_argument("--limit", type=int, default=20)
        parser.add_argument("--status", choices=[c for c, _ in SimulationRun.STATUS_CHOICES])

    def handle(self, *args, **options):
        if not registry_available():
            self.stdout.write("ℹ️ No hay tabla de corridas; ejecuta 'python manage.py migrate'.")
            return

        runs = SimulationRun.objects.all()
        if options["status"]:
            runs = runs.filter(status=options["status"])
        runs = list(runs[: options["limit"]])
        if not runs:
            self.stdout.write("ℹ️ No hay corridas registradas.")
            return

        for run in runs:
            cost = "-" if run.total_cost is None else f"{run.total_cost:.4f}"
            self.stdout.write(
                f"#{run.id} {run.created_at:%Y-%m-%d %H:%M} {run.command}:{run.solver} "
                f"seed={run.seed} [{run.status}] costo={cost} → {run.output_dir}"
            )
        self.stdout.write(self.style.SUCCESS(f"✅ {len(runs)} corridas"))
