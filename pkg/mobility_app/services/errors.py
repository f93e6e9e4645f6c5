from __future__ import annotations


class MobilityError(Exception):
    """Classe de base de toutes les erreurs des services de mobilité."""


class InvalidParams(MobilityError):
    """Jeu de paramètres GBM-SR qui viole ses invariants."""


class DomainError(MobilityError):
    """Argument hors du domaine de l'opération."""


class HeavyTail(MobilityError):
    """Exposant de queue haute trop petit pour une moyenne finie."""


class NonPositiveRate(MobilityError):
    """Flux d'emploi donnant un taux de réinitialisation nul."""


class NoRoot(MobilityError):
    """Aucun exposant de queue ne reproduit la part observée."""


class NotConverged(MobilityError):
    """Le balayage de mélange ne franchit jamais le seuil."""


class ParseError(MobilityError):
    """Fichier d'entrée illisible syntaxiquement."""


class PanelValidationError(MobilityError):
    """Entrée lue qui viole une contrainte du panel."""


class IngestIOError(MobilityError):
    """Fichier d'entrée impossible à lire."""


class MissingSeries(MobilityError):
    """Export WID sans ligne pour les codes demandés."""


class ReportError(MobilityError):
    """Échec fatal du pipeline de rapport."""
